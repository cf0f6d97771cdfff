#include "sivar/error.hpp"
#include "sivar/pipeline.hpp"
#include "sivar/rng.hpp"
#include "sivar/synth.hpp"
#include "sivar/textio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

namespace {

using json = nlohmann::json;
using namespace sivar;

constexpr int kExitUsage = 1;
constexpr int kExitDataFailure = 2;

struct Settings {
  std::string manifest;
  std::string out = "out";
  std::string table;
  double rate_gbps = 2.5;
  double sigma_k = 5.0;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::vector<double> freqs_ghz{1.0, 2.0, 4.0};
  std::vector<double> scd21_freqs_ghz{1.0, 2.0, 3.0};
  std::string driver;
  double swing_v = 1.2;
  double edge_ps = 40.0;
  std::vector<std::string> fixed_before, fixed_after;
  std::string tester_sigma;
  int prbs = 7;
  bool no_eye = false;
  bool no_impedance = false;
  std::string spec;
  std::string s4p;
  std::string port_map;
  std::string column;
  std::size_t pool_size = 2077;
  std::vector<std::size_t> sizes{10, 30, 100, 300, 1000, 2000};
  std::size_t trials = 500;
  double max_failure_fraction = 0.01;
};

// Values from --config become defaults; flags parsed afterwards override them.
void apply_config(const std::string& path, Settings& s) {
  json j;
  try {
    j = json::parse(textio::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw Error("config " + path + ": top level must be an object");
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "manifest") s.manifest = v.get<std::string>();
      else if (k == "out") s.out = v.get<std::string>();
      else if (k == "table") s.table = v.get<std::string>();
      else if (k == "rate_gbps") s.rate_gbps = v.get<double>();
      else if (k == "sigma_k") s.sigma_k = v.get<double>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else if (k == "threads") s.threads = v.get<unsigned>();
      else if (k == "freqs_ghz") s.freqs_ghz = v.get<std::vector<double>>();
      else if (k == "scd21_freqs_ghz") s.scd21_freqs_ghz = v.get<std::vector<double>>();
      else if (k == "driver") s.driver = v.get<std::string>();
      else if (k == "swing_v") s.swing_v = v.get<double>();
      else if (k == "edge_ps") s.edge_ps = v.get<double>();
      else if (k == "fixed_before") s.fixed_before = v.get<std::vector<std::string>>();
      else if (k == "fixed_after") s.fixed_after = v.get<std::vector<std::string>>();
      else if (k == "tester_sigma") s.tester_sigma = v.get<std::string>();
      else if (k == "prbs") s.prbs = v.get<int>();
      else if (k == "spec") s.spec = v.get<std::string>();
      else if (k == "trials") s.trials = v.get<std::size_t>();
      else if (k == "sizes") s.sizes = v.get<std::vector<std::size_t>>();
      else throw Error("unknown key");
    } catch (const json::exception&) {
      throw Error("config " + path + ": key '" + k + "' has the wrong type");
    } catch (const Error&) {
      throw Error("config " + path + ": unknown key '" + k + "'");
    }
  }
}

std::string find_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string_view(argv[i]) == "--config") return argv[i + 1];
  for (int i = 1; i < argc; ++i) {
    std::string_view a(argv[i]);
    if (a.rfind("--config=", 0) == 0) return std::string(a.substr(9));
  }
  return {};
}

AnalyzeOptions analyze_options(const Settings& s) {
  AnalyzeOptions o;
  o.outcomes.skew_freqs_hz.clear();
  o.outcomes.loss_freqs_hz.clear();
  o.outcomes.scd21_freqs_hz.clear();
  for (double f : s.freqs_ghz) {
    o.outcomes.skew_freqs_hz.push_back(f * 1e9);
    o.outcomes.loss_freqs_hz.push_back(f * 1e9);
  }
  for (double f : s.scd21_freqs_ghz) o.outcomes.scd21_freqs_hz.push_back(f * 1e9);
  o.driver.rate_gbps = s.rate_gbps;
  o.driver.swing_v = s.swing_v;
  o.driver.edge_s = s.edge_ps * 1e-12;
  if (!s.driver.empty()) o.driver.file = s.driver;
  for (const auto& p : s.fixed_before) o.fixed_before.emplace_back(p);
  for (const auto& p : s.fixed_after) o.fixed_after.emplace_back(p);
  o.prbs_order = s.prbs;
  o.eye = !s.no_eye;
  o.impedance = !s.no_impedance;
  o.threads = s.threads;
  return o;
}

ReportOptions report_options(const Settings& s) {
  if (!(s.sigma_k > 0.0)) throw Error("--sigma-k must be positive");
  ReportOptions r;
  r.sigma_k = s.sigma_k;
  if (!s.tester_sigma.empty()) r.tester_sigma = parse_tester_sigma(textio::read_file(s.tester_sigma));
  return r;
}

OutcomeTable input_table(const Settings& s) {
  const std::filesystem::path p = s.table.empty() ? std::filesystem::path(s.out) / "outcomes.csv" : std::filesystem::path(s.table);
  return load_outcome_table(p);
}

int cmd_analyze(const Settings& s) {
  if (s.manifest.empty()) throw Error("analyze: --manifest is required");
  const Manifest m = load_manifest(s.manifest);
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  const AnalyzeResult r = analyze(m, analyze_options(s));
  write_analysis(r, s.out);
  std::cout << "analyzed " << r.table.rows.size() << " nets, " << r.failed << " failed; results in " << s.out << "\n";
  if (r.failure_fraction() > s.max_failure_fraction) {
    std::cerr << "error: " << r.failed << " nets failed (more than "
              << textio::format_number(100.0 * s.max_failure_fraction, 3) << "%); see analyze.log\n";
    return kExitDataFailure;
  }
  return 0;
}

int cmd_report(const Settings& s, ReportKind kind) {
  const OutcomeTable t = input_table(s);
  write_report(t, report_options(s), s.out, kind);
  std::cout << "report written to " << s.out << "\n";
  return 0;
}

int cmd_samplesize(const Settings& s) {
  std::vector<double> pool;
  if (!s.column.empty()) {
    const OutcomeTable t = input_table(s);
    for (const auto& [row, v] : t.column_values(s.column)) pool.push_back(v);
  } else {
    Rng rng(s.seed, {0x5A});
    pool.resize(s.pool_size);
    for (double& v : pool) v = rng.normal();
  }
  std::vector<std::size_t> sizes;
  for (std::size_t n : s.sizes)
    if (n <= pool.size()) sizes.push_back(n);
    else std::cerr << "warning: size " << n << " exceeds the pool of " << pool.size() << "; skipped\n";
  const auto rows = sample_size_experiment(pool, sizes, s.trials, s.seed);
  std::filesystem::create_directories(s.out);
  write_sample_size(rows, s.out);
  for (const auto& r : rows)
    std::cout << "n=" << r.n << "  max |rel error| = " << textio::format_number(100.0 * r.max_abs_rel_error, 4)
              << "%\n";
  return 0;
}

int cmd_synth(const Settings& s, bool seed_given) {
  PopulationSpec spec = s.spec.empty() ? PopulationSpec{} : load_population_spec(s.spec);
  if (seed_given) spec.seed = s.seed;
  const Population pop(spec);
  const SynthSummary sum = write_population(pop, s.out, s.threads);
  textio::write_file(std::filesystem::path(s.out) / "spec.json", population_spec_json(spec));
  std::cout << "generated " << sum.nets << " nets (" << spec.boards << " boards x " << spec.nets_per_board
            << ") in " << s.out << "\n";
  return 0;
}

int cmd_eye(const Settings& s) {
  if (s.s4p.empty()) throw Error("eye: --s4p is required");
  PortMap pm;
  if (!s.port_map.empty()) {
    if (std::sscanf(s.port_map.c_str(), "%d-%d-%d-%d", &pm.file_port[0], &pm.file_port[1], &pm.file_port[2],
                    &pm.file_port[3]) != 4 ||
        !pm.is_valid())
      throw Error("--port-map must be a permutation like 1-2-3-4");
  }
  const EyeMetrics m = run_eye(s.s4p, analyze_options(s), s.out, pm);
  std::cout << "eye height " << textio::format_number(m.eye_height_v, 6) << " V, width "
            << textio::format_number(m.eye_width_ui, 6) << " UI, jitter " << textio::format_number(m.jitter_ui, 6)
            << " UI, vertical noise " << textio::format_number(m.vertical_eye_noise_v, 6) << " V\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  try {
    if (const std::string cfg = find_config(argc, argv); !cfg.empty()) apply_config(cfg, s);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App app{"Signal-integrity variability analysis for differential-net S-parameter populations"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of option defaults (flags override it)");

  auto common = [&](CLI::App* c) {
    c->add_option("--out", s.out, "Output directory")->capture_default_str();
    c->add_option("--threads", s.threads, "Worker threads (0 = all cores)")->capture_default_str();
  };
  auto link = [&](CLI::App* c) {
    c->add_option("--rate-gbps", s.rate_gbps, "Data rate")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--driver", s.driver, "Driver single-bit response CSV (default: trapezoid)");
    c->add_option("--swing", s.swing_v, "Trapezoid driver swing in volts")->capture_default_str();
    c->add_option("--edge-ps", s.edge_ps, "Trapezoid driver edge time")->capture_default_str();
    c->add_option("--fixed-before", s.fixed_before, "4-port files cascaded before the board");
    c->add_option("--fixed-after", s.fixed_after, "4-port files cascaded after the board");
    c->add_option("--prbs", s.prbs, "PRBS order")->capture_default_str();
  };
  auto report = [&](CLI::App* c) {
    c->add_option("--table", s.table, "Outcome table CSV (default: <out>/outcomes.csv)");
    c->add_option("--sigma-k", s.sigma_k, "Sigma multiple for extrapolated limits")->capture_default_str();
    c->add_option("--tester-sigma", s.tester_sigma, "JSON object of tester repeatability sigma per outcome");
  };

  auto* analyze = app.add_subcommand("analyze", "Reduce every net of a manifest to its outcome row");
  common(analyze);
  link(analyze);
  analyze->add_option("--manifest", s.manifest, "Manifest CSV");
  analyze->add_option("--freqs", s.freqs_ghz, "Skew and loss sample frequencies in GHz")->delimiter(',');
  analyze->add_option("--scd21-freqs", s.scd21_freqs_ghz, "SCD21 sample frequencies in GHz")->delimiter(',');
  analyze->add_flag("--no-eye", s.no_eye, "Skip eye simulation");
  analyze->add_flag("--no-impedance", s.no_impedance, "Skip TDR impedance");
  analyze->add_option("--max-failures", s.max_failure_fraction, "Failure fraction that sets exit code 2")
      ->capture_default_str();

  auto* rep = app.add_subcommand("report", "Global summary, same-net variation and ANOVA tables with plots");
  common(rep);
  report(rep);
  auto* snv = app.add_subcommand("snv", "Same-net variation table only");
  common(snv);
  report(snv);
  auto* anv = app.add_subcommand("anova", "ANOVA table only");
  common(anv);
  report(anv);

  auto* ss = app.add_subcommand("samplesize", "Sample size versus sigma error experiment");
  common(ss);
  ss->add_option("--table", s.table, "Outcome table CSV providing the pool");
  ss->add_option("--column", s.column, "Outcome column used as the pool (default: Gaussian pool)");
  ss->add_option("--pool-size", s.pool_size, "Size of the Gaussian pool")->capture_default_str();
  ss->add_option("--sizes", s.sizes, "Sample sizes")->delimiter(',');
  ss->add_option("--trials", s.trials, "Trials per size")->capture_default_str()->check(CLI::PositiveNumber);
  auto* ss_seed = ss->add_option("--seed", s.seed, "Random seed")->capture_default_str();

  auto* syn = app.add_subcommand("synth", "Generate a synthetic board population");
  common(syn);
  syn->add_option("--spec", s.spec, "Population spec JSON (default: built-in spec)");
  auto* syn_seed = syn->add_option("--seed", s.seed, "Override the spec seed");

  auto* eye = app.add_subcommand("eye", "Simulate one net's eye diagram");
  common(eye);
  link(eye);
  eye->add_option("--s4p", s.s4p, "Touchstone file");
  eye->add_option("--port-map", s.port_map, "File ports for P near, P far, N near, N far (e.g. 1-2-3-4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  (void)ss_seed;

  try {
    if (*analyze) return cmd_analyze(s);
    if (*rep) return cmd_report(s, ReportKind::Full);
    if (*snv) return cmd_report(s, ReportKind::Snv);
    if (*anv) return cmd_report(s, ReportKind::Anova);
    if (*ss) return cmd_samplesize(s);
    if (*syn) return cmd_synth(s, syn_seed->count() > 0);
    if (*eye) return cmd_eye(s);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
