// Acceptance gate: one line per criterion, nonzero exit if any criterion fails.
#include "support.hpp"

#include "sivar/dataset.hpp"
#include "sivar/linksim.hpp"
#include "sivar/metrics.hpp"
#include "sivar/parallel.hpp"
#include "sivar/pipeline.hpp"
#include "sivar/rng.hpp"
#include "sivar/stats.hpp"
#include "sivar/synth.hpp"
#include "sivar/tdr.hpp"
#include "sivar/textio.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace sivar;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string num(double v, int digits = 6) { return textio::format_number(v, digits); }

// 1. Tester deflation and the 5-sigma eye-height band.
constexpr double kDeflatedExpect = 0.0218;
constexpr double kDeflatedTol = 5e-5;
constexpr double kHalfWidthPct = 14.0;
constexpr double kHalfWidthTolPct = 0.3;

Outcome criterion_deflation() {
  Outcome o;
  const double s = deflate_tester(0.024, 0.010).sigma;
  o.require(std::abs(s - kDeflatedExpect) <= kDeflatedTol, "deflated sigma " + num(s));
  const auto [lo, hi] = k_sigma_interval(0.783, s, 5.0);
  const double pct = 100.0 * (hi - lo) / 2.0 / 0.783;
  o.require(std::abs(pct - kHalfWidthPct) <= kHalfWidthTolPct, "5-sigma half-width " + num(pct, 4) + "% of mean");
  return o;
}

// 2. Sample-size brackets.
constexpr std::size_t kPool = 2077;
constexpr std::size_t kTrials = 500;

Outcome criterion_sample_size() {
  Outcome o;
  Rng rng(20240601);
  std::vector<double> pool(kPool);
  for (double& v : pool) v = rng.normal();
  const std::vector<std::size_t> sizes{10, 30, 1000};
  const auto rows = sample_size_experiment(pool, sizes, kTrials, 1);
  const double e10 = rows[0].max_abs_rel_error, e30 = rows[1].max_abs_rel_error, e1000 = rows[2].max_abs_rel_error;
  o.require(e10 >= 0.40 && e10 <= 0.90, "n=10 " + num(100 * e10, 4) + "%");
  o.require(e30 >= 0.20 && e30 <= 0.50, "n=30 " + num(100 * e30, 4) + "%");
  o.require(e1000 <= 0.08, "n=1000 " + num(100 * e1000, 4) + "%");
  return o;
}

// 3. Two-delay identity.
constexpr double kScdTolDb = 0.01;
constexpr double kPowerTol = 1e-9;

Outcome criterion_two_delay() {
  Outcome o;
  const auto f = testsupport::grid(10e6, 10e6, 600);
  double worst_db = 0.0, worst_power = 0.0;
  for (double dtau : {5e-12, 20e-12, 56e-12}) {
    const auto net = testsupport::two_lines(
        f, [&](double x) { return testsupport::delay_factor(x, 1.1e-9 + dtau); },
        [&](double x) { return testsupport::delay_factor(x, 1.1e-9); });
    const auto mm = to_mixed_mode(net);
    for (double fs : {1e9, 2e9, 4e9}) {
      const double expect = 20.0 * std::log10(std::abs(std::sin(std::numbers::pi * fs * dtau)));
      worst_db = std::max(worst_db, std::abs(scd21_db(mm, fs) - expect));
    }
    const auto sdd = mm.sdd21(), scd = mm.scd21();
    for (std::size_t k = 0; k < f.size(); ++k)
      worst_power = std::max(worst_power, std::abs(std::norm(sdd[k]) + std::norm(scd[k]) - 1.0));
  }
  o.require(worst_db <= kScdTolDb, "max SCD21 error " + num(worst_db, 3) + " dB");
  o.require(worst_power <= kPowerTol, "max power error " + num(worst_power, 3));
  return o;
}

// 4. Skew closure.
constexpr double kSkewTolPs = 0.1;
constexpr double kDesignedTolPs = 1e-4;

Outcome criterion_skew() {
  Outcome o;
  PopulationSpec spec;
  spec.boards = 1;
  spec.nets_per_board = 100;
  spec.seed = 404;
  spec.via_c_pf = 0.0;
  spec.pn_imbalance_sigma = 0.0;
  const Population pop(spec);
  const double v_ref = 0.0254 / spec.time_per_inch_s();
  double worst = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i)
    worst = std::max(worst, std::abs(random_skew_ps(pop.network(i), pop.record(i), v_ref, 1e9) -
                                     pop.truth().nets[i].random_skew_ps));
  o.require(worst <= kSkewTolPs, "injected skew max error " + num(worst, 3) + " ps");

  // Length mismatch only, on matched lines: physical skew equals the designed-in skew.
  spec.skew_sigma_ps = {};
  spec.skew_mean_ps = 0.0;
  spec.z_sigma_ohm = {};
  spec.z_odd_ohm = 50.0;
  const Population designed(spec);
  double worst_designed = 0.0;
  for (std::size_t i = 0; i < designed.size(); ++i)
    worst_designed =
        std::max(worst_designed, std::abs(random_skew_ps(designed.network(i), designed.record(i), v_ref, 1e9)));
  o.require(worst_designed <= kDesignedTolPs, "designed-in residual " + num(worst_designed, 3) + " ps");
  return o;
}

// 5. Impedance closure.
constexpr double kZTol = 0.5;

Outcome criterion_impedance() {
  Outcome o;
  const auto f = testsupport::grid(10e6, 10e6, 600);
  for (double z : {45.0, 50.0, 55.0, 60.0}) {
    NetModelParams p;
    p.p = {z, 1.5e-9, 10.0, 0.0, 0.0, 0.0};
    p.n = p.p;
    const double got = windowed_impedance(step_response(to_mixed_mode(net_model(p, f))), std::nullopt, 2e-9).odd_ohm;
    o.require(std::abs(got - z) <= kZTol, num(2 * z, 4) + " ohm diff -> " + num(got, 5) + " odd");
  }
  return o;
}

// 6. ANOVA oracles.
constexpr double kHandF = 0.5;
constexpr double kHandP = 0.626;
constexpr double kHandPTol = 1e-3;
constexpr double kNullMeanTol = 0.15;
constexpr double kKsMin = 0.01;
constexpr double kScaleTol = 1e-9;

Outcome criterion_anova() {
  Outcome o;
  const std::vector<double> y{0, 2, 1, 3};
  const auto hand = anova(y, {PredictorSpec::categorical("g", {"A", "A", "B", "B"})});
  o.require(std::abs(hand.terms[0].f_stat - kHandF) < 1e-12 && std::abs(hand.terms[0].p_value - kHandP) <= kHandPTol,
            "hand f " + num(hand.terms[0].f_stat) + " p " + num(hand.terms[0].p_value, 4));

  std::vector<double> fs, ps;
  double worst_scale = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed, {6});
    std::vector<double> out(200), len(200), scaled(200);
    std::vector<std::string> core(200);
    for (std::size_t i = 0; i < 200; ++i) {
      out[i] = rng.normal();
      len[i] = rng.uniform(1.7, 32.8);
      core[i] = "c" + std::to_string(i < 8 ? i : rng.below(8));
      scaled[i] = 3.25 * out[i];
    }
    const std::vector<PredictorSpec> preds{PredictorSpec::continuous("length", len),
                                           PredictorSpec::categorical("core", core)};
    const auto r = anova(out, preds);
    for (const auto& t : r.terms) {
      fs.push_back(t.f_stat);
      ps.push_back(t.p_value);
    }
    if (seed < 50) {
      const auto s = anova(scaled, preds);
      for (std::size_t t = 0; t < r.terms.size(); ++t) {
        worst_scale = std::max(worst_scale, std::abs(s.terms[t].f_stat / r.terms[t].f_stat - 1.0));
        worst_scale = std::max(worst_scale, std::abs(s.terms[t].p_value - r.terms[t].p_value));
      }
    }
  }
  const double mean_f = std::accumulate(fs.begin(), fs.end(), 0.0) / static_cast<double>(fs.size());
  const double ks = testsupport::ks_uniform_pvalue(ps);
  o.require(std::abs(mean_f - 1.0) <= kNullMeanTol, "null mean F " + num(mean_f, 4));
  o.require(ks > kKsMin, "KS p " + num(ks, 3));
  o.require(worst_scale <= kScaleTol, "scale deviation " + num(worst_scale, 3));
  return o;
}

// 7. Same-net variation recovery.
constexpr double kSnvTarget = 7.2;
constexpr double kSnvTol = 0.3;

double pooled_skew(const PopulationSpec& spec) {
  const Population pop(spec);
  // Reference velocity from the longest net, as in the pipeline.
  std::size_t longest = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (pop.record(i).mean_length_in() > pop.record(longest).mean_length_in()) longest = i;
  const double v_ref = propagation_velocity(pop.network(longest), pop.record(longest).mean_length_in(), 1e9);

  std::vector<double> skew(pop.size());
  parallel_for(pop.size(), 0, [&](std::size_t i) { skew[i] = random_skew_ps(pop.network(i), pop.record(i), v_ref, 1e9); });
  std::map<std::string, std::vector<double>> by_net;
  for (std::size_t i = 0; i < pop.size(); ++i) by_net[pop.record(i).net_name].push_back(skew[i]);
  std::vector<std::vector<double>> groups;
  for (auto& [name, v] : by_net) groups.push_back(std::move(v));
  return pooled_snv(groups).sigma;
}

Outcome criterion_snv() {
  Outcome o;
  PopulationSpec spec;
  spec.boards = 6;
  spec.nets_per_board = 2000;
  spec.seed = 72;
  spec.skew_sigma_ps = {0.0, 0.0, kSnvTarget};
  const double got = pooled_skew(spec);
  o.require(std::abs(got - kSnvTarget) <= kSnvTol, "injected 7.2 ps -> " + num(got, 4) + " ps");

  spec.skew_sigma_ps = {};
  spec.z_sigma_ohm = {};
  spec.loss_sigma_rel = {};
  spec.pn_imbalance_sigma = 0.0;
  const double zero = pooled_skew(spec);
  o.require(zero == 0.0, "all sigmas zero -> " + num(zero, 3) + " ps");
  return o;
}

// 8. Eye engine.
constexpr double kEyeTol = 1e-6;
constexpr double kMinNetsPerSecond = 1.0;

Outcome criterion_eye() {
  Outcome o;
  constexpr double ui = 400e-12;
  constexpr std::size_t spu = 32;
  const auto driver = DriverWaveform::trapezoid(ui, spu, 1.0, 40e-12);
  const auto pattern = prbs(7);

  const auto m = extract_metrics(synthesize_eye(DiffBlock::through(testsupport::grid(10e6, 10e6, 4000)), driver, pattern));
  o.require(std::abs(m.eye_height_v - 1.0) <= kEyeTol && m.jitter_ui <= kEyeTol,
            "identity height error " + num(m.eye_height_v - 1.0, 3) + " jitter " + num(m.jitter_ui, 3));

  const auto f = testsupport::grid(10e6, 10e6, 600);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed, {8});
    const double f0 = rng.uniform(0.5e9, 5e9), a2 = rng.uniform(-0.3, 0.3), t1 = rng.uniform(0.2e-9, 2e-9),
                 t2 = t1 + rng.uniform(0.05e-9, 1e-9);
    std::vector<cplx> h;
    for (double x : f)
      h.push_back((testsupport::delay_factor(x, t1) + a2 * testsupport::delay_factor(x, t2)) / cplx(1.0, x / f0));
    const auto ir = impulse_response(f, h, driver.dt_s, ui);
    const auto eye = fold_eye(pulse_response(ir, driver), driver, pattern);
    const auto brute = testsupport::brute_force_waveform(ir.samples, ir.negative_count, driver.samples_v, spu, pattern);
    for (std::size_t i = 0; i < brute.size(); ++i) worst = std::max(worst, std::abs(brute[i] - eye.waveform_v[i]));
  }
  o.require(worst <= kEyeTol, "superposition vs convolution " + num(worst, 3) + " V");

  NetModelParams p;
  p.p = {52.4, 2e-9, 13.0, 0.09, 0.06, 0.0};
  p.n = p.p;
  p.via_c_f = 0.15e-12;
  const auto grid601 = testsupport::grid(10e6, 10e6, 601);
  const auto mm = to_mixed_mode(net_model(p, grid601));
  constexpr int kRuns = 10;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < kRuns; ++i) simulate_link(mm, {}, driver, pattern);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double rate = kRuns / secs;
  o.require(rate >= kMinNetsPerSecond, "throughput " + num(rate, 4) + " nets/s");
  return o;
}

// 9. End-to-end determinism across thread counts.
int run_cli(const std::string& args) {
  const int status = std::system((std::string(SIVAR_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = textio::read_file(e.path());
  return files;
}

Outcome criterion_determinism() {
  Outcome o;
  const auto dir = testsupport::scratch_dir("acceptance_determinism");
  textio::write_file(dir / "spec.json", R"({"boards": 3, "nets_per_board": 40, "seed": 9})");
  std::map<std::string, std::map<std::string, std::string>> trees;
  for (const std::string threads : {"1", "8"}) {
    for (const std::string pass : {"a", "b"}) {
      const fs::path root = dir / (threads + pass);
      const std::string t = " --threads " + threads;
      bool ok = run_cli("synth" + t + " --spec " + (dir / "spec.json").string() + " --out " + (root / "pop").string()) == 0;
      ok = ok && run_cli("analyze" + t + " --manifest " + (root / "pop" / "manifest.csv").string() + " --out " +
                         (root / "run").string()) == 0;
      ok = ok && run_cli("report" + t + " --out " + (root / "run").string()) == 0;
      o.require(ok, "pipeline run threads=" + threads + " pass " + pass);
      if (ok) trees[threads + pass] = tree(root);
    }
  }
  if (trees.size() == 4) {
    const bool same = trees["1a"] == trees["1b"] && trees["1a"] == trees["8a"] && trees["8a"] == trees["8b"];
    o.require(same, std::to_string(trees["1a"].size()) + " files identical across 4 runs");
  }
  return o;
}

// 10. Calibrated population means.
constexpr double kMeanTolRel = 0.10;

Outcome criterion_calibration() {
  Outcome o;
  const PopulationSpec spec;
  const Population pop(spec);
  AnalyzeOptions opts;
  const auto driver = opts.driver.make();
  const auto pattern = prbs(opts.prbs_order);
  const LinkComponents fixed;

  std::size_t longest = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (pop.record(i).mean_length_in() > pop.record(longest).mean_length_in()) longest = i;
  const double v_ref = propagation_velocity(pop.network(longest), pop.record(longest).mean_length_in(), 1e9);

  OutcomeTable table;
  table.columns = outcome_columns(opts.outcomes);
  table.rows.resize(pop.size());
  parallel_for(pop.size(), 0, [&](std::size_t i) {
    const auto rec = pop.record(i);
    table.rows[i].record = rec;
    table.rows[i].values = outcome_values(analyze_network(pop.network(i), rec, v_ref, opts, fixed, driver, pattern),
                                          opts.outcomes);
  });
  const ResultTable summary = global_summary_table(table, {});

  auto mean_of = [&](const std::string& name) {
    for (const auto& row : summary.rows)
      if (std::get<std::string>(row[0]) == name) return std::get<double>(row[3]);
    return std::nan("");
  };
  const std::pair<std::string, double> targets[] = {{column::kImpedance, spec.z_odd_ohm},
                                                    {column::kEyeHeight, 0.783},
                                                    {column::loss_per_inch(4e9), 0.42},
                                                    {column::scd21(1e9), -30.4}};
  for (const auto& [name, target] : targets) {
    const double m = mean_of(name);
    o.require(std::abs(m - target) <= kMeanTolRel * std::abs(target),
              name + " mean " + num(m, 4) + " vs " + num(target, 4));
  }
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 tester deflation and 5-sigma band", criterion_deflation},
      {"2 sample-size error brackets", criterion_sample_size},
      {"3 two-delay mode conversion identity", criterion_two_delay},
      {"4 random skew closure", criterion_skew},
      {"5 impedance closure", criterion_impedance},
      {"6 ANOVA oracles", criterion_anova},
      {"7 same-net variation recovery", criterion_snv},
      {"8 eye engine", criterion_eye},
      {"9 end-to-end determinism", criterion_determinism},
      {"10 calibrated population means", criterion_calibration},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  criterion %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
