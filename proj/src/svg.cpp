#include "sivar/svg.hpp"

#include "sivar/textio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sivar::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) { return textio::format_number(v, 6); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi <= lo) {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

class Canvas {
 public:
  Canvas(Range x, Range y, const Axes& axes) : x_(x), y_(y) {
    out_ = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out_ += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
            escape(axes.title) + "</text>\n";
    out_ += "<text x=\"" + num(kLeft + plot_w() / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
            escape(axes.x_label) + "</text>\n";
    out_ += "<text transform=\"translate(16," + num(kTop + plot_h() / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
            escape(axes.y_label) + "</text>\n";
    out_ += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(plot_w()) + "\" height=\"" +
            num(plot_h()) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = x_.lo + (x_.hi - x_.lo) * i / 4.0;
      const double fy = y_.lo + (y_.hi - y_.lo) * i / 4.0;
      out_ += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(kTop + plot_h() + 16) + "\" text-anchor=\"middle\">" +
              num(fx) + "</text>\n";
      out_ += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(fy) + 4) + "\" text-anchor=\"end\">" + num(fy) +
              "</text>\n";
    }
  }

  double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * plot_w(); }
  double py(double y) const { return kTop + plot_h() - (y - y_.lo) / (y_.hi - y_.lo) * plot_h(); }

  void add(const std::string& element) { out_ += element + "\n"; }

  void polyline(std::span<const double> x, std::span<const double> y, const char* color, double opacity = 1.0) {
    std::string pts;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(x[i])) + "," + num(py(y[i]));
    }
    add("<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-opacity=\"" + num(opacity) +
        "\" points=\"" + pts + "\"/>");
  }

  std::string finish() { return out_ + "</svg>\n"; }

 private:
  static double plot_w() { return kWidth - kLeft - kRight; }
  static double plot_h() { return kHeight - kTop - kBottom; }

  Range x_, y_;
  std::string out_;
};

}  // namespace

std::string histogram(std::span<const double> values, const Axes& axes, std::size_t bins) {
  Range xr;
  for (double v : values) xr.add(v);
  xr.finish();
  bins = std::max<std::size_t>(bins, 1);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    auto b = static_cast<std::size_t>((v - xr.lo) / (xr.hi - xr.lo) * static_cast<double>(bins));
    counts[std::min(b, bins - 1)]++;
  }
  Range yr;
  yr.add(0.0);
  yr.add(static_cast<double>(*std::max_element(counts.begin(), counts.end())) * 1.05 + 1.0);
  yr.finish();
  Canvas c(xr, yr, axes);
  const double w = (xr.hi - xr.lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    if (counts[b] == 0) continue;
    const double x0 = c.px(xr.lo + w * static_cast<double>(b));
    const double x1 = c.px(xr.lo + w * static_cast<double>(b + 1));
    const double y0 = c.py(static_cast<double>(counts[b]));
    c.add("<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
          num(c.py(0.0) - y0) + "\" fill=\"" + kPalette[0] + "\" stroke=\"white\" stroke-width=\"0.5\"/>");
  }
  return c.finish();
}

std::string scatter(std::span<const double> x, std::span<const double> y, const Axes& axes) {
  Range xr, yr;
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) {
    xr.add(x[i]);
    yr.add(y[i]);
  }
  xr.finish();
  yr.finish();
  Canvas c(xr, yr, axes);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    c.add("<circle cx=\"" + num(c.px(x[i])) + "\" cy=\"" + num(c.py(y[i])) + "\" r=\"1.5\" fill=\"" + kPalette[0] +
          "\" fill-opacity=\"0.5\"/>");
  }
  return c.finish();
}

std::string line_plot(const std::vector<Series>& series, const Axes& axes) {
  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.finish();
  yr.finish();
  Canvas c(xr, yr, axes);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    c.polyline(series[k].x, series[k].y, color);
    c.add("<text x=\"" + num(kLeft + 10) + "\" y=\"" + num(kTop + 16 + 14 * static_cast<double>(k)) + "\" fill=\"" +
          color + "\">" + escape(series[k].name) + "</text>");
  }
  return c.finish();
}

std::string traces(std::span<const double> x, const std::vector<std::vector<double>>& ys, const Axes& axes) {
  Range xr, yr;
  for (double v : x) xr.add(v);
  for (const auto& y : ys)
    for (double v : y) yr.add(v);
  xr.finish();
  yr.finish();
  Canvas c(xr, yr, axes);
  for (const auto& y : ys) c.polyline(x, y, kPalette[0], 0.35);
  return c.finish();
}

}  // namespace sivar::svg
