#include "sivar/touchstone.hpp"

#include "sivar/error.hpp"
#include "sivar/textio.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sivar {

namespace {

constexpr int kPorts = 4;
constexpr std::size_t kBlockValues = 1 + 2 * kPorts * kPorts;
constexpr double kDbFloor = -400.0;

struct Options {
  double freq_scale = 1e9;
  DataFormat format = DataFormat::MA;
  double z_ref = 50.0;
};

Options parse_option_line(std::string_view body, std::size_t line_no) {
  Options opt;
  std::istringstream in{std::string(body)};
  std::string tok;
  while (in >> tok) {
    const std::string t = textio::to_lower(tok);
    if (t == "hz") opt.freq_scale = 1.0;
    else if (t == "khz") opt.freq_scale = 1e3;
    else if (t == "mhz") opt.freq_scale = 1e6;
    else if (t == "ghz") opt.freq_scale = 1e9;
    else if (t == "s") {}
    else if (t == "y" || t == "z" || t == "h" || t == "g")
      throw ParseError(line_no, "malformed option line: only S parameters are supported (got " + tok + ")");
    else if (t == "ri") opt.format = DataFormat::RI;
    else if (t == "ma") opt.format = DataFormat::MA;
    else if (t == "db") opt.format = DataFormat::DB;
    else if (t == "r") {
      std::string z;
      double zv = 0.0;
      if (!(in >> z) || !textio::parse_double(z, zv) || !(zv > 0.0))
        throw ParseError(line_no, "malformed option line: R must be followed by a positive impedance");
      opt.z_ref = zv;
    } else {
      throw ParseError(line_no, "malformed option line: unexpected token '" + tok + "'");
    }
  }
  return opt;
}

cplx to_complex(double a, double b, DataFormat fmt) {
  constexpr double deg = std::numbers::pi / 180.0;
  switch (fmt) {
    case DataFormat::RI: return {a, b};
    case DataFormat::MA: return std::polar(a, b * deg);
    case DataFormat::DB: return std::polar(std::pow(10.0, a / 20.0), b * deg);
  }
  return {};
}

struct Block {
  std::size_t line = 0;
  std::vector<double> values;
};

}  // namespace

NetworkData parse_touchstone(std::string_view text, const TouchstoneReadOptions& options,
                             std::vector<std::string>* warnings) {
  Options opt;
  bool have_option_line = false;
  std::vector<Block> blocks;
  bool ports_checked = false;

  auto finish_block = [&](const Block& b) {
    const std::size_t c = b.values.size();
    if (!ports_checked) {
      const std::size_t pairs = (c - 1) / 2;
      const auto n = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(pairs))));
      if (c % 2 == 0 || n * n != pairs)
        throw ParseError(b.line, "cannot determine port count from " + std::to_string(c) + " values");
      if (n != kPorts)
        throw ParseError(b.line, "unsupported port count " + std::to_string(n) + " (only 4-port data is accepted)");
      ports_checked = true;
    }
    if (c < kBlockValues) throw ParseError(b.line, "truncated matrix block (" + std::to_string(c) + " of 33 values)");
    if (c > kBlockValues) throw ParseError(b.line, "too many values in matrix block (" + std::to_string(c) + ")");
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::optional<Block> current;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    if (auto bang = line.find('!'); bang != std::string_view::npos) line = line.substr(0, bang);
    line = textio::trim(line);
    if (line.empty()) {
      if (eol == text.size()) break;
      continue;
    }

    if (line.front() == '[') throw ParseError(line_no, "Touchstone v2 keyword found; only version 1 files are supported");
    if (line.front() == '#') {
      if (have_option_line) {
        if (warnings) warnings->push_back("line " + std::to_string(line_no) + ": repeated option line ignored");
      } else {
        opt = parse_option_line(line.substr(1), line_no);
        have_option_line = true;
      }
      continue;
    }

    std::vector<double> vals;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) {
        double v = 0.0;
        if (!textio::parse_double(line.substr(i, j - i), v))
          throw ParseError(line_no, "invalid number '" + std::string(line.substr(i, j - i)) + "'");
        vals.push_back(v);
      }
      i = j;
    }

    if (vals.size() % 2 == 1) {
      if (current) {
        finish_block(*current);
        blocks.push_back(std::move(*current));
      }
      current = Block{line_no, std::move(vals)};
    } else {
      if (!current) throw ParseError(line_no, "data continuation line before any frequency");
      current->values.insert(current->values.end(), vals.begin(), vals.end());
    }
    if (eol == text.size()) break;
  }
  if (current) {
    finish_block(*current);
    blocks.push_back(std::move(*current));
  }

  if (!have_option_line && warnings) warnings->push_back("no option line; assuming # GHz S MA R 50");
  if (blocks.empty()) throw ParseError(line_no, "no frequency points");

  NetworkData net;
  net.z_ref_ohm = opt.z_ref;
  net.port_map = options.port_map;
  net.freqs_hz.reserve(blocks.size());
  net.s.reserve(blocks.size());
  for (const Block& b : blocks) {
    const double f = b.values[0] * opt.freq_scale;
    if (!net.freqs_hz.empty() && !(f > net.freqs_hz.back()))
      throw ParseError(b.line, "non-monotone frequency");
    net.freqs_hz.push_back(f);
    SMatrix4 m;
    for (int r = 0; r < kPorts; ++r)
      for (int c = 0; c < kPorts; ++c) {
        const std::size_t idx = 1 + 2 * static_cast<std::size_t>(r * kPorts + c);
        m(r, c) = to_complex(b.values[idx], b.values[idx + 1], opt.format);
      }
    net.s.push_back(m);
  }

  if (options.expected_z_ref_ohm && std::abs(*options.expected_z_ref_ohm - net.z_ref_ohm) > 1e-9 && warnings) {
    warnings->push_back("reference impedance " + textio::format_number(net.z_ref_ohm) + " differs from expected " +
                        textio::format_number(*options.expected_z_ref_ohm) + "; no renormalization performed");
  }
  if (!net.port_map.is_valid()) throw Error("port map must be a permutation of 1..4");
  return net;
}

NetworkData read_touchstone(const std::filesystem::path& path, const TouchstoneReadOptions& options,
                            std::vector<std::string>* warnings) {
  const std::string text = textio::read_file(path);
  try {
    return parse_touchstone(text, options, warnings);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

std::string write_touchstone(const NetworkData& net, DataFormat format, int significant_digits) {
  net.validate();
  static constexpr const char* kNames[] = {"RI", "MA", "DB"};
  std::string out;
  out.reserve(net.size() * 4 * (8 * (significant_digits + 8)));
  out += "! 4-port S-parameters\n";
  out += "# Hz S ";
  out += kNames[static_cast<int>(format)];
  out += " R " + textio::format_number(net.z_ref_ohm, significant_digits) + "\n";

  const int freq_digits = significant_digits + 3;
  for (std::size_t k = 0; k < net.size(); ++k) {
    for (int r = 0; r < kPorts; ++r) {
      out += r == 0 ? textio::format_number(net.freqs_hz[k], freq_digits) : std::string(" ");
      for (int c = 0; c < kPorts; ++c) {
        const cplx v = net.s[k](r, c);
        double a = 0.0, b = 0.0;
        switch (format) {
          case DataFormat::RI:
            a = v.real();
            b = v.imag();
            break;
          case DataFormat::MA:
            a = std::abs(v);
            b = std::arg(v) * 180.0 / std::numbers::pi;
            break;
          case DataFormat::DB: {
            const double mag = std::abs(v);
            a = mag > 0.0 ? std::max(kDbFloor, 20.0 * std::log10(mag)) : kDbFloor;
            b = std::arg(v) * 180.0 / std::numbers::pi;
            break;
          }
        }
        out += ' ';
        out += textio::format_number(a, significant_digits);
        out += ' ';
        out += textio::format_number(b, significant_digits);
      }
      out += '\n';
    }
  }
  return out;
}

void save_touchstone(const std::filesystem::path& path, const NetworkData& net, DataFormat format,
                     int significant_digits) {
  textio::write_file(path, write_touchstone(net, format, significant_digits));
}

}  // namespace sivar
