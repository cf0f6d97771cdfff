#include "sivar/linksim.hpp"

#include "sivar/error.hpp"
#include "sivar/textio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace sivar {

namespace {

std::size_t positive_mod(long long a, std::size_t m) {
  const auto mm = static_cast<long long>(m);
  return static_cast<std::size_t>(((a % mm) + mm) % mm);
}

}  // namespace

std::size_t DriverWaveform::samples_per_ui() const {
  return static_cast<std::size_t>(std::llround(bit_period_s / dt_s));
}

void DriverWaveform::validate() const {
  if (!(dt_s > 0.0) || !(bit_period_s > 0.0)) throw Error("driver: dt and UI must be positive");
  const double ratio = bit_period_s / dt_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-12 * ratio || std::round(ratio) < 1.0)
    throw Error("driver: time step does not divide the unit interval");
  if (samples_v.empty()) throw Error("driver: empty waveform");
  if (std::abs(samples_v.back()) > 1e-3) throw Error("driver: waveform does not settle to the 0-level by its end");
}

DriverWaveform DriverWaveform::trapezoid(double bit_period_s, std::size_t samples_per_ui, double swing_v,
                                         double edge_s) {
  if (samples_per_ui < 2) throw Error("driver: need at least 2 samples per UI");
  DriverWaveform d;
  d.bit_period_s = bit_period_s;
  d.dt_s = bit_period_s / static_cast<double>(samples_per_ui);
  auto ramp = [&](double t) {
    if (edge_s <= 0.0) return t >= 0.0 ? 1.0 : 0.0;
    return std::clamp(t / edge_s, 0.0, 1.0);
  };
  const std::size_t len = samples_per_ui + static_cast<std::size_t>(std::ceil(edge_s / d.dt_s)) + 2;
  d.samples_v.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) * d.dt_s;
    // Step differences in sample units keep the telescoping sum exact.
    const double up = ramp(t);
    const double down = ramp(static_cast<double>(static_cast<long long>(i) - static_cast<long long>(samples_per_ui)) * d.dt_s);
    d.samples_v[i] = swing_v * (up - down);
  }
  return d;
}

DriverWaveform DriverWaveform::parse_csv(std::string_view text) {
  DriverWaveform d;
  std::vector<double> times;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_ui = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = textio::trim(line);
    if (l.empty()) continue;
    if (l.front() == '#') {
      const auto pos = l.find("ui=");
      if (pos == std::string_view::npos) continue;
      if (!textio::parse_double(l.substr(pos + 3), d.bit_period_s))
        throw ParseError(line_no, "driver: invalid ui value");
      have_ui = true;
      continue;
    }
    const auto fields = textio::split_csv_line(l);
    if (fields.size() != 2) throw ParseError(line_no, "driver: expected 2 columns (time_s, volts)");
    double t = 0.0, v = 0.0;
    if (!textio::parse_double(fields[0], t) || !textio::parse_double(fields[1], v)) {
      if (times.empty() && d.samples_v.empty()) continue;  // column header
      throw ParseError(line_no, "driver: invalid number");
    }
    times.push_back(t);
    d.samples_v.push_back(v);
  }
  if (!have_ui) throw ParseError(line_no, "driver: missing '# ui=<seconds>' line");
  if (times.size() < 2) throw ParseError(line_no, "driver: need at least 2 samples");
  d.dt_s = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) - d.dt_s) > 1e-6 * d.dt_s)
      throw ParseError(i + 1, "driver: time samples are not uniform");
  }
  d.validate();
  return d;
}

DriverWaveform DriverWaveform::load_csv(const std::filesystem::path& path) {
  return parse_csv(textio::read_file(path));
}

std::string DriverWaveform::to_csv() const {
  std::string out = "# ui=" + textio::format_number(bit_period_s, 12) + "\ntime_s,volts\n";
  for (std::size_t i = 0; i < samples_v.size(); ++i) {
    out += textio::format_number(static_cast<double>(i) * dt_s, 12) + "," +
           textio::format_number(samples_v[i], 12) + "\n";
  }
  return out;
}

std::vector<std::uint8_t> prbs(int order) {
  int tap = 0;
  switch (order) {
    case 7: tap = 6; break;
    case 9: tap = 5; break;
    case 11: tap = 9; break;
    case 15: tap = 14; break;
    case 23: tap = 18; break;
    case 31: tap = 28; break;
    default: throw Error("prbs: unsupported order " + std::to_string(order));
  }
  const std::size_t length = (std::size_t{1} << order) - 1;
  std::vector<std::uint8_t> bits(length);
  std::uint32_t state = (order == 32) ? 0xFFFFFFFFu : ((1u << order) - 1u);
  for (std::size_t i = 0; i < length; ++i) {
    const std::uint32_t out = ((state >> (order - 1)) ^ (state >> (tap - 1))) & 1u;
    state = ((state << 1) | out) & ((1u << order) - 1u);
    bits[i] = static_cast<std::uint8_t>(out);
  }
  return bits;
}

ImpulseResponse impulse_response(std::span<const double> freqs_hz, std::span<const cplx> sdd21, double dt_s,
                                 double ui_s, const SpectrumOptions& options, std::vector<std::string>* warnings) {
  const double df = mean_step(freqs_hz);
  if (df > 1.0 / (8.0 * ui_s))
    throw Error("impulse_response: frequency grid too sparse to resolve the unit interval (need >= 8 points per 1/UI)");
  if (freqs_hz.back() < 2.0 / ui_s && warnings)
    warnings->push_back("channel data stops below 2/UI; eye is band-limited by the measurement");
  auto n = static_cast<std::size_t>(std::llround(1.0 / (dt_s * df)));
  if (n % 2) ++n;
  n = std::max<std::size_t>(n, 4);
  return impulse_on_uniform_grid(freqs_hz, sdd21, n, dt_s, options);
}

PulseResponse pulse_response(const ImpulseResponse& ir, const DriverWaveform& driver) {
  const std::size_t n = ir.size();
  const std::size_t lead = ir.negative_count;
  std::vector<double> h(n);
  for (std::size_t m = 0; m < n; ++m) h[m] = ir.samples[(m + n - lead) % n];

  PulseResponse p;
  p.dt_s = ir.dt_s;
  p.lead = lead;
  p.v.assign(n + driver.samples_v.size() - 1, 0.0);
  for (std::size_t j = 0; j < driver.samples_v.size(); ++j) {
    const double d = driver.samples_v[j];
    if (d == 0.0) continue;
    for (std::size_t m = 0; m < n; ++m) p.v[m + j] += h[m] * d;
  }
  return p;
}

EyeDiagram fold_eye(const PulseResponse& pulse, const DriverWaveform& driver, std::span<const std::uint8_t> pattern) {
  driver.validate();
  const std::size_t spu = driver.samples_per_ui();
  const std::size_t bits = pattern.size();
  if (bits < 127) throw Error("synthesize_eye: pattern must have at least 127 bits");
  const std::size_t period = bits * spu;

  std::vector<double> folded(period, 0.0);
  double area = 0.0;
  for (std::size_t i = 0; i < pulse.v.size(); ++i) {
    folded[positive_mod(static_cast<long long>(i) - static_cast<long long>(pulse.lead), period)] += pulse.v[i];
    area += pulse.v[i];
  }

  std::vector<double> y(period, 0.0);
  for (std::size_t k = 0; k < bits; ++k) {
    if (!pattern[k]) continue;
    const std::size_t shift = k * spu;
    for (std::size_t i = 0; i < period; ++i) {
      std::size_t idx = i + shift;
      if (idx >= period) idx -= period;
      y[idx] += folded[i];
    }
  }

  EyeDiagram eye;
  eye.ui_s = driver.bit_period_s;
  eye.dt_s = driver.dt_s;
  eye.samples_per_ui = spu;
  // Long runs of ones settle at area/spu; zeros sit at 0.
  eye.threshold_v = 0.5 * area / static_cast<double>(spu);

  // Circular mean of crossing phases within the UI.
  double cx = 0.0, sx = 0.0;
  std::size_t crossings = 0;
  const double th = eye.threshold_v;
  for (std::size_t i = 0; i < period; ++i) {
    const double a = y[i];
    const double b = y[(i + 1) % period];
    if ((a >= th) != (b >= th)) {
      const double t = static_cast<double>(i) + (th - a) / (b - a);
      const double phase = 2.0 * std::numbers::pi * std::fmod(t, static_cast<double>(spu)) / static_cast<double>(spu);
      cx += std::cos(phase);
      sx += std::sin(phase);
      ++crossings;
    }
  }
  if (crossings == 0) throw Error("eye collapsed: waveform never crosses the decision threshold");
  double mean_phase = std::atan2(sx, cx);
  if (mean_phase < 0.0) mean_phase += 2.0 * std::numbers::pi;
  const double crossing = mean_phase / (2.0 * std::numbers::pi) * static_cast<double>(spu);
  const long long center = std::llround(crossing + 0.5 * static_cast<double>(spu));
  const std::size_t center_idx = positive_mod(center, spu);
  eye.window_start = positive_mod(static_cast<long long>(center_idx) - static_cast<long long>(spu), period);

  eye.traces.resize(bits);
  for (std::size_t k = 0; k < bits; ++k) {
    auto& tr = eye.traces[k];
    tr.resize(2 * spu + 1);
    const std::size_t start = (eye.window_start + k * spu) % period;
    for (std::size_t j = 0; j < tr.size(); ++j) tr[j] = y[(start + j) % period];
  }

  // Align bits to trace centres by correlation; the sign gives the polarity.
  double best = -1.0;
  std::size_t best_shift = 0;
  int polarity = 1;
  for (std::size_t q = 0; q < bits; ++q) {
    double corr = 0.0;
    for (std::size_t k = 0; k < bits; ++k) {
      const double s = pattern[(k + bits - q) % bits] ? 1.0 : -1.0;
      corr += s * (eye.traces[k][spu] - th);
    }
    if (std::abs(corr) > best) {
      best = std::abs(corr);
      best_shift = q;
      polarity = corr >= 0.0 ? 1 : -1;
    }
  }
  eye.rails.resize(bits);
  for (std::size_t k = 0; k < bits; ++k)
    eye.rails[k] = polarity * (pattern[(k + bits - best_shift) % bits] ? 1 : -1);

  eye.waveform_v = std::move(y);
  return eye;
}

EyeDiagram synthesize_eye(const DiffBlock& channel, const DriverWaveform& driver, std::span<const std::uint8_t> pattern,
                          const LinkOptions& options) {
  channel.validate();
  driver.validate();
  const auto s21 = channel.s21();
  const ImpulseResponse ir = impulse_response(channel.freqs_hz, s21, driver.dt_s, driver.bit_period_s, options.spectrum);
  return fold_eye(pulse_response(ir, driver), driver, pattern);
}

EyeMetrics extract_metrics(const EyeDiagram& eye) {
  const std::size_t spu = eye.samples_per_ui;
  if (spu == 0 || eye.traces.empty()) throw Error("extract_metrics: empty eye");
  const std::size_t c = eye.center_column();

  double top_min = std::numeric_limits<double>::infinity(), top_max = -top_min;
  double bot_min = top_min, bot_max = -top_min;
  std::size_t n_top = 0, n_bot = 0;
  for (std::size_t k = 0; k < eye.traces.size(); ++k) {
    const auto& tr = eye.traces[k];
    if (tr.size() <= c) throw Error("extract_metrics: trace shorter than the eye window");
    const double v = tr[c];
    const bool upper = eye.rails.empty() ? v >= eye.threshold_v : eye.rails[k] > 0;
    if (upper) {
      top_min = std::min(top_min, v);
      top_max = std::max(top_max, v);
      ++n_top;
    } else {
      bot_min = std::min(bot_min, v);
      bot_max = std::max(bot_max, v);
      ++n_bot;
    }
  }
  if (n_top == 0 || n_bot == 0) throw Error("extract_metrics: eye needs both rails populated");

  double jmin = std::numeric_limits<double>::infinity(), jmax = -jmin;
  std::size_t crossings = 0;
  const double th = eye.threshold_v;
  for (const auto& tr : eye.traces) {
    for (std::size_t j = 0; j + 1 < tr.size(); ++j) {
      const double a = tr[j], b = tr[j + 1];
      if ((a >= th) == (b >= th)) continue;
      const double t_ui = (static_cast<double>(j) + (th - a) / (b - a)) / static_cast<double>(spu);
      // Nominal crossings sit half a UI either side of the centre.
      double rel = t_ui - 0.5;
      rel -= std::round(rel);
      jmin = std::min(jmin, rel);
      jmax = std::max(jmax, rel);
      ++crossings;
    }
  }
  if (crossings == 0) throw Error("eye collapsed: no threshold crossings");

  EyeMetrics m;
  m.eye_height_v = std::max(0.0, top_min - bot_max);
  m.vertical_eye_noise_v = (top_max - top_min) + (bot_max - bot_min);
  m.jitter_ui = jmax - jmin;
  m.eye_width_ui = std::max(0.0, 1.0 - m.jitter_ui);
  return m;
}

EyeMetrics simulate_link(const MixedModeNetwork& pwb, const LinkComponents& fixed, const DriverWaveform& driver,
                         std::span<const std::uint8_t> pattern, const LinkOptions& options) {
  std::vector<DiffBlock> chain;
  chain.reserve(fixed.before.size() + fixed.after.size() + 1);
  chain.insert(chain.end(), fixed.before.begin(), fixed.before.end());
  chain.push_back(pwb.differential());
  chain.insert(chain.end(), fixed.after.begin(), fixed.after.end());
  const DiffBlock channel = cascade_chain(chain);
  return extract_metrics(synthesize_eye(channel, driver, pattern, options));
}

std::string eye_csv(const EyeDiagram& eye) {
  std::string out = "t_ui";
  const std::size_t width = eye.traces.empty() ? 0 : eye.traces.front().size();
  for (std::size_t j = 0; j < width; ++j)
    out += "," + textio::format_number(static_cast<double>(j) / static_cast<double>(eye.samples_per_ui));
  out += "\n";
  for (std::size_t k = 0; k < eye.traces.size(); ++k) {
    out += "trace" + std::to_string(k);
    for (double v : eye.traces[k]) out += "," + textio::format_number(v);
    out += "\n";
  }
  return out;
}

}  // namespace sivar
