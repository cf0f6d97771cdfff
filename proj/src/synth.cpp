#include "sivar/synth.hpp"

#include "sivar/error.hpp"
#include "sivar/parallel.hpp"
#include "sivar/rng.hpp"
#include "sivar/textio.hpp"
#include "sivar/touchstone.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

namespace sivar {

namespace {

using json = nlohmann::json;

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kInchToMeter = 0.0254;
constexpr double kNeperPerDb = std::numbers::ln10 / 20.0;

enum Stream : std::uint64_t { kBoardStream = 1, kCoreStream = 2, kNetStream = 3, kBoardNetStream = 4 };

struct Abcd {
  cplx a, b, c, d;
};

Abcd operator*(const Abcd& x, const Abcd& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

Abcd line_abcd(const LineParams& line, double f_hz) {
  const double f_ghz = f_hz * 1e-9;
  const double loss_db = (line.k_skin_db_per_in * std::sqrt(f_ghz) + line.k_dielectric_db_per_in * f_ghz) * line.length_in;
  const cplx gl(loss_db * kNeperPerDb + line.flat_loss_np, 2.0 * std::numbers::pi * f_hz * line.tau_s);
  const cplx ch = std::cosh(gl);
  const cplx sh = std::sinh(gl);
  return {ch, line.z_ohm * sh, sh / line.z_ohm, ch};
}

SMatrix2 abcd_to_s(const Abcd& m, double z0) {
  const cplx den = m.a + m.b / z0 + m.c * z0 + m.d;
  SMatrix2 s;
  s(0, 0) = (m.a + m.b / z0 - m.c * z0 - m.d) / den;
  s(0, 1) = 2.0 * (m.a * m.d - m.b * m.c) / den;
  s(1, 0) = 2.0 / den;
  s(1, 1) = (-m.a + m.b / z0 - m.c * z0 + m.d) / den;
  return s;
}

void read_sigmas(const json& j, const char* key, EffectSigmas& out) {
  if (!j.contains(key)) return;
  const json& o = j.at(key);
  if (!o.is_object()) throw Error(std::string("population spec: field '") + key + "' must be an object");
  for (const auto& [k, v] : o.items()) {
    if (!v.is_number()) throw Error(std::string("population spec: field '") + key + "." + k + "' must be a number");
    if (k == "board") out.board = v.get<double>();
    else if (k == "core") out.core = v.get<double>();
    else if (k == "net") out.net = v.get<double>();
    else throw Error(std::string("population spec: unknown field '") + key + "." + k + "'");
  }
}

json sigmas_json(const EffectSigmas& s) { return json{{"board", s.board}, {"core", s.core}, {"net", s.net}}; }

double round9(double v) { return textio::round_significant(v, 9); }

}  // namespace

void PopulationSpec::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw Error(std::string("population spec: field '") + field + "' " + what);
  };
  require(boards >= 1, "boards", "must be >= 1");
  require(serials.empty() || serials.size() == static_cast<std::size_t>(boards), "serials",
          "must list one label per board");
  require(std::set<std::string>(serials.begin(), serials.end()).size() == serials.size(), "serials",
          "must be unique");
  require(cores >= 1, "cores", "must be >= 1");
  require(nets_per_board >= 1, "nets_per_board", "must be >= 1");
  require(length_min_in > 0.0, "length_min_in", "must be positive");
  require(length_max_in >= length_min_in, "length_max_in", "must be >= length_min_in");
  require(er >= 1.0, "er", "must be >= 1");
  require(z_odd_ohm > 0.0, "z_odd_ohm", "must be positive");
  require(k_skin_db_per_in >= 0.0, "k_skin_db_per_in", "must be non-negative");
  require(k_dielectric_db_per_in >= 0.0, "k_dielectric_db_per_in", "must be non-negative");
  require(via_c_pf >= 0.0, "via_c_pf", "must be non-negative");
  for (auto [s, name] : {std::pair{z_sigma_ohm, "z_sigma_ohm"}, std::pair{loss_sigma_rel, "loss_sigma_rel"},
                         std::pair{skew_sigma_ps, "skew_sigma_ps"}})
    require(s.board >= 0.0 && s.core >= 0.0 && s.net >= 0.0, name, "must have non-negative sigmas");
  require(designed_skew_min_ps >= 0.0, "designed_skew_min_ps", "must be non-negative");
  require(designed_skew_max_ps >= designed_skew_min_ps, "designed_skew_max_ps", "must be >= designed_skew_min_ps");
  require(pn_imbalance_sigma >= 0.0, "pn_imbalance_sigma", "must be non-negative");
  require(f_start_hz >= 10e6 * (1.0 - 1e-9), "f_start_hz", "must be >= 10 MHz");
  require(f_step_hz > 0.0, "f_step_hz", "must be positive");
  require(f_points >= 2, "f_points", "must be >= 2");
  require(f_start_hz + f_step_hz * (f_points - 1) <= 6e9 * (1.0 + 1e-9), "f_points", "puts the grid above 6 GHz");
}

std::vector<double> PopulationSpec::grid() const {
  std::vector<double> g(static_cast<std::size_t>(f_points));
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = f_start_hz + f_step_hz * static_cast<double>(k);
  return g;
}

std::string PopulationSpec::serial(int board) const {
  if (!serials.empty()) return serials.at(static_cast<std::size_t>(board));
  char buf[32];
  std::snprintf(buf, sizeof buf, "SN%02d", board + 1);
  return buf;
}

double PopulationSpec::time_per_inch_s() const { return std::sqrt(er) / kSpeedOfLight * kInchToMeter; }

NetworkData net_model(const NetModelParams& params, const std::vector<double>& freqs_hz) {
  NetworkData net;
  net.freqs_hz = freqs_hz;
  net.z_ref_ohm = params.z_ref_ohm;
  net.s.reserve(freqs_hz.size());
  for (double f : freqs_hz) {
    const Abcd via{1.0, 0.0, cplx(0.0, 2.0 * std::numbers::pi * f * params.via_c_f), 1.0};
    const SMatrix2 sp = abcd_to_s(via * line_abcd(params.p, f) * via, params.z_ref_ohm);
    const SMatrix2 sn = abcd_to_s(via * line_abcd(params.n, f) * via, params.z_ref_ohm);
    SMatrix4 s = SMatrix4::Zero();
    s.block<2, 2>(0, 0) = sp;
    s.block<2, 2>(2, 2) = sn;
    net.s.push_back(s);
  }
  return net;
}

Population::Population(const PopulationSpec& spec) {
  spec.validate();
  truth_.spec = spec;
  grid_ = spec.grid();

  const auto boards = static_cast<std::size_t>(spec.boards);
  const auto cores = static_cast<std::size_t>(spec.cores);
  const auto nets = static_cast<std::size_t>(spec.nets_per_board);
  for (std::size_t b = 0; b < boards; ++b) {
    Rng rng(spec.seed, {kBoardStream, b});
    truth_.board_z.push_back(rng.normal(0.0, spec.z_sigma_ohm.board));
    truth_.board_loss.push_back(rng.normal(0.0, spec.loss_sigma_rel.board));
    truth_.board_skew_ps.push_back(rng.normal(0.0, spec.skew_sigma_ps.board));
  }
  for (std::size_t c = 0; c < cores; ++c) {
    Rng rng(spec.seed, {kCoreStream, c});
    truth_.core_z.push_back(rng.normal(0.0, spec.z_sigma_ohm.core));
    truth_.core_loss.push_back(rng.normal(0.0, spec.loss_sigma_rel.core));
    truth_.core_skew_ps.push_back(rng.normal(0.0, spec.skew_sigma_ps.core));
  }

  // Layout identity is shared by every board.
  struct Identity {
    double length_in, designed_ps;
    int core;
  };
  std::vector<Identity> identity(nets);
  for (std::size_t k = 0; k < nets; ++k) {
    Rng rng(spec.seed, {kNetStream, k});
    identity[k].length_in = rng.uniform(spec.length_min_in, spec.length_max_in);
    identity[k].core = 1 + static_cast<int>(rng.below(cores));
    identity[k].designed_ps = rng.uniform(spec.designed_skew_min_ps, spec.designed_skew_max_ps);
  }

  const double tpi = spec.time_per_inch_s();
  truth_.nets.reserve(boards * nets);
  for (std::size_t b = 0; b < boards; ++b) {
    for (std::size_t k = 0; k < nets; ++k) {
      const Identity& id = identity[k];
      const auto c = static_cast<std::size_t>(id.core - 1);
      Rng rng(spec.seed, {kBoardNetStream, b, k});
      NetTruth t;
      char name[32];
      std::snprintf(name, sizeof name, "NET%05zu", k + 1);
      t.net_name = name;
      t.board_serial = spec.serial(static_cast<int>(b));
      t.routing_core = id.core;
      const double dlen = id.designed_ps * 1e-12 / tpi;
      t.len_p_in = id.length_in + 0.5 * dlen;
      t.len_n_in = id.length_in - 0.5 * dlen;
      t.designed_skew_ps = id.designed_ps;
      t.z_odd_ohm = spec.z_odd_ohm + truth_.board_z[b] + truth_.core_z[c] + rng.normal(0.0, spec.z_sigma_ohm.net);
      t.loss_scale = std::max(
          0.0, 1.0 + truth_.board_loss[b] + truth_.core_loss[c] + rng.normal(0.0, spec.loss_sigma_rel.net));
      t.random_skew_ps = spec.skew_mean_ps + truth_.board_skew_ps[b] + truth_.core_skew_ps[c] +
                         rng.normal(0.0, spec.skew_sigma_ps.net) + spec.skew_per_inch_ps * id.length_in;
      t.tau_p_s = t.len_p_in * tpi + 0.5 * t.random_skew_ps * 1e-12;
      t.tau_n_s = t.len_n_in * tpi - 0.5 * t.random_skew_ps * 1e-12;
      const double eps = std::clamp(rng.normal(0.0, spec.pn_imbalance_sigma), -0.5, 0.5);
      const double flat = -std::log(1.0 - std::abs(eps));
      (eps >= 0.0 ? t.flat_loss_p_np : t.flat_loss_n_np) = flat;
      truth_.nets.push_back(std::move(t));
    }
  }
}

NetModelParams Population::model_params(std::size_t i) const {
  const NetTruth& t = truth_.nets.at(i);
  const PopulationSpec& s = truth_.spec;
  NetModelParams m;
  m.via_c_f = s.via_c_pf * 1e-12;
  auto line = [&](double len, double tau, double flat) {
    LineParams l;
    l.z_ohm = t.z_odd_ohm;
    l.tau_s = tau;
    l.length_in = len;
    l.k_skin_db_per_in = s.k_skin_db_per_in * t.loss_scale;
    l.k_dielectric_db_per_in = s.k_dielectric_db_per_in * t.loss_scale;
    l.flat_loss_np = flat;
    return l;
  };
  m.p = line(t.len_p_in, t.tau_p_s, t.flat_loss_p_np);
  m.n = line(t.len_n_in, t.tau_n_s, t.flat_loss_n_np);
  return m;
}

NetworkData Population::network(std::size_t i) const { return net_model(model_params(i), grid_); }

std::string Population::s4p_path(std::size_t i) const {
  const NetTruth& t = truth_.nets.at(i);
  return "boards/" + t.board_serial + "/" + t.net_name + ".s4p";
}

NetRecord Population::record(std::size_t i) const {
  const NetTruth& t = truth_.nets.at(i);
  NetRecord r;
  r.net_name = t.net_name;
  r.board_serial = t.board_serial;
  r.routing_core = t.routing_core;
  // Lengths go through the manifest text, so keep what a reader will see.
  r.len_p_in = round9(t.len_p_in);
  r.len_n_in = round9(t.len_n_in);
  r.tester_id = "SYNTH";
  r.s4p_path = s4p_path(i);
  return r;
}

PopulationSpec parse_population_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("population spec: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("population spec: top level must be an object");
  PopulationSpec s;
  auto number = [&](const std::string& key, const json& v) {
    if (!v.is_number()) throw Error("population spec: field '" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [&](const std::string& key, const json& v) {
    if (!v.is_number_integer()) throw Error("population spec: field '" + key + "' must be an integer");
    return v.get<long long>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "boards") s.boards = static_cast<int>(integer(key, v));
    else if (key == "serials") {
      if (!v.is_array()) throw Error("population spec: field 'serials' must be an array of strings");
      for (const auto& e : v) {
        if (!e.is_string()) throw Error("population spec: field 'serials' must be an array of strings");
        s.serials.push_back(e.get<std::string>());
      }
    } else if (key == "cores") s.cores = static_cast<int>(integer(key, v));
    else if (key == "nets_per_board") s.nets_per_board = static_cast<int>(integer(key, v));
    else if (key == "length_min_in") s.length_min_in = number(key, v);
    else if (key == "length_max_in") s.length_max_in = number(key, v);
    else if (key == "er") s.er = number(key, v);
    else if (key == "z_odd_ohm") s.z_odd_ohm = number(key, v);
    else if (key == "k_skin_db_per_in") s.k_skin_db_per_in = number(key, v);
    else if (key == "k_dielectric_db_per_in") s.k_dielectric_db_per_in = number(key, v);
    else if (key == "via_c_pf") s.via_c_pf = number(key, v);
    else if (key == "z_sigma_ohm") read_sigmas(j, "z_sigma_ohm", s.z_sigma_ohm);
    else if (key == "loss_sigma_rel") read_sigmas(j, "loss_sigma_rel", s.loss_sigma_rel);
    else if (key == "skew_sigma_ps") read_sigmas(j, "skew_sigma_ps", s.skew_sigma_ps);
    else if (key == "skew_mean_ps") s.skew_mean_ps = number(key, v);
    else if (key == "skew_per_inch_ps") s.skew_per_inch_ps = number(key, v);
    else if (key == "designed_skew_min_ps") s.designed_skew_min_ps = number(key, v);
    else if (key == "designed_skew_max_ps") s.designed_skew_max_ps = number(key, v);
    else if (key == "pn_imbalance_sigma") s.pn_imbalance_sigma = number(key, v);
    else if (key == "f_start_hz") s.f_start_hz = number(key, v);
    else if (key == "f_step_hz") s.f_step_hz = number(key, v);
    else if (key == "f_points") s.f_points = static_cast<int>(integer(key, v));
    else if (key == "seed") {
      if (!v.is_number_unsigned()) throw Error("population spec: field 'seed' must be a non-negative integer");
      s.seed = v.get<std::uint64_t>();
    } else throw Error("population spec: unknown field '" + key + "'");
  }
  s.validate();
  return s;
}

PopulationSpec load_population_spec(const std::filesystem::path& path) {
  return parse_population_spec(textio::read_file(path));
}

namespace {

json spec_to_json(const PopulationSpec& s) {
  json j;
  j["boards"] = s.boards;
  j["serials"] = s.serials;
  j["cores"] = s.cores;
  j["nets_per_board"] = s.nets_per_board;
  j["length_min_in"] = s.length_min_in;
  j["length_max_in"] = s.length_max_in;
  j["er"] = s.er;
  j["z_odd_ohm"] = s.z_odd_ohm;
  j["k_skin_db_per_in"] = s.k_skin_db_per_in;
  j["k_dielectric_db_per_in"] = s.k_dielectric_db_per_in;
  j["via_c_pf"] = s.via_c_pf;
  j["z_sigma_ohm"] = sigmas_json(s.z_sigma_ohm);
  j["loss_sigma_rel"] = sigmas_json(s.loss_sigma_rel);
  j["skew_sigma_ps"] = sigmas_json(s.skew_sigma_ps);
  j["skew_mean_ps"] = s.skew_mean_ps;
  j["skew_per_inch_ps"] = s.skew_per_inch_ps;
  j["designed_skew_min_ps"] = s.designed_skew_min_ps;
  j["designed_skew_max_ps"] = s.designed_skew_max_ps;
  j["pn_imbalance_sigma"] = s.pn_imbalance_sigma;
  j["f_start_hz"] = s.f_start_hz;
  j["f_step_hz"] = s.f_step_hz;
  j["f_points"] = s.f_points;
  j["seed"] = s.seed;
  return j;
}

json rounded(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(round9(x));
  return a;
}

}  // namespace

std::string population_spec_json(const PopulationSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

std::string ground_truth_json(const GroundTruth& truth) {
  json j;
  j["spec"] = spec_to_json(truth.spec);
  j["board_offsets"] = {{"z_ohm", rounded(truth.board_z)},
                        {"loss_rel", rounded(truth.board_loss)},
                        {"skew_ps", rounded(truth.board_skew_ps)}};
  j["core_offsets"] = {{"z_ohm", rounded(truth.core_z)},
                       {"loss_rel", rounded(truth.core_loss)},
                       {"skew_ps", rounded(truth.core_skew_ps)}};
  json nets = json::array();
  for (const auto& t : truth.nets) {
    nets.push_back({{"net_name", t.net_name},
                    {"board_serial", t.board_serial},
                    {"routing_core", t.routing_core},
                    {"len_p_in", round9(t.len_p_in)},
                    {"len_n_in", round9(t.len_n_in)},
                    {"z_odd_ohm", round9(t.z_odd_ohm)},
                    {"tau_p_s", round9(t.tau_p_s)},
                    {"tau_n_s", round9(t.tau_n_s)},
                    {"loss_scale", round9(t.loss_scale)},
                    {"flat_loss_p_np", round9(t.flat_loss_p_np)},
                    {"flat_loss_n_np", round9(t.flat_loss_n_np)},
                    {"designed_skew_ps", round9(t.designed_skew_ps)},
                    {"random_skew_ps", round9(t.random_skew_ps)}});
  }
  j["nets"] = std::move(nets);
  return j.dump(1) + "\n";
}

SynthSummary write_population(const Population& pop, const std::filesystem::path& out_dir, unsigned threads) {
  std::filesystem::create_directories(out_dir);
  parallel_for(pop.size(), threads,
               [&](std::size_t i) { save_touchstone(out_dir / pop.s4p_path(i), pop.network(i)); });
  std::vector<NetRecord> records;
  records.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) records.push_back(pop.record(i));
  textio::write_file(out_dir / "manifest.csv", write_manifest(records));
  textio::write_file(out_dir / "ground_truth.json", ground_truth_json(pop.truth()));
  SynthSummary s;
  s.nets = pop.size();
  s.files = pop.size();
  return s;
}

}  // namespace sivar
