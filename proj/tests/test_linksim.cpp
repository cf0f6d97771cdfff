#include "support.hpp"

#include "sivar/error.hpp"
#include "sivar/linksim.hpp"
#include "sivar/rng.hpp"
#include "sivar/synth.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>

using namespace sivar;
using testsupport::delay_factor;
using testsupport::grid;

namespace {

constexpr double kUi = 400e-12;
constexpr std::size_t kSpu = 32;
constexpr double kDt = kUi / kSpu;

DriverWaveform unit_driver() { return DriverWaveform::trapezoid(kUi, kSpu, 1.0, 40e-12); }

// Grid reaching the Nyquist frequency of the driver step.
std::vector<double> full_band() { return grid(10e6, 10e6, 4000); }

// Sine integral by adaptive quadrature.
double si(double x) {
  if (x == 0.0) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; }, 0.0, x, 15, 1e-13);
}

DiffBlock lossy_line(double length_in, const std::vector<double>& f) {
  NetModelParams p;
  p.p = {50.0, length_in * 150e-12, length_in, 0.09, 0.06, 0.0};
  p.n = p.p;
  p.via_c_f = 0.15e-12;
  return to_mixed_mode(net_model(p, f)).differential();
}

DiffBlock random_channel(std::uint64_t seed, const std::vector<double>& f) {
  Rng rng(seed);
  const double f0 = rng.uniform(0.5e9, 5e9);
  const int taps = 1 + static_cast<int>(rng.below(3));
  std::vector<std::pair<double, double>> echoes;
  for (int i = 0; i < taps; ++i) echoes.emplace_back(rng.uniform(-0.4, 0.9), rng.uniform(0.1e-9, 3e-9));
  DiffBlock b;
  b.freqs_hz = f;
  for (double x : f) {
    cplx h = 0.0;
    for (auto [a, tau] : echoes) h += a * delay_factor(x, tau);
    h /= cplx(1.0, x / f0);
    SMatrix2 s;
    s << 0.05, h, h, 0.05;
    b.s.push_back(s);
  }
  return b;
}

EyeDiagram hand_eye(std::size_t spu, const std::vector<std::vector<double>>& traces) {
  EyeDiagram eye;
  eye.samples_per_ui = spu;
  eye.ui_s = 1e-9;
  eye.dt_s = eye.ui_s / static_cast<double>(spu);
  eye.threshold_v = 0.5;
  eye.traces = traces;
  return eye;
}

std::vector<double> ramp_trace(std::size_t spu, double cross_sample, bool rising) {
  std::vector<double> tr(2 * spu + 1);
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const double v = std::clamp(0.5 + (static_cast<double>(j) - cross_sample) * 0.5, 0.0, 1.0);
    tr[j] = rising ? v : 1.0 - v;
  }
  return tr;
}

}  // namespace

TEST_CASE("prbs is maximal length") {
  for (int order : {7, 9, 11}) {
    const auto bits = prbs(order);
    const std::size_t period = (std::size_t{1} << order) - 1;
    REQUIRE(bits.size() == period);
    std::set<unsigned> words;
    for (std::size_t k = 0; k < period; ++k) {
      unsigned w = 0;
      for (int b = 0; b < order; ++b) w = (w << 1) | bits[(k + static_cast<std::size_t>(b)) % period];
      words.insert(w);
    }
    CHECK(words.size() == period);
    CHECK(words.count(0) == 0);
  }
  CHECK(prbs(15).size() == 32767);
  CHECK_THROWS_AS(prbs(8), Error);
}

TEST_CASE("trapezoid driver") {
  const auto d = DriverWaveform::trapezoid(kUi, kSpu, 1.2, 40e-12);
  CHECK(d.samples_per_ui() == kSpu);
  CHECK_NOTHROW(d.validate());
  CHECK(d.samples_v.front() == 0.0);
  CHECK(std::abs(d.samples_v.back()) < 1e-3);
  // Back-to-back ones hold the full swing.
  std::vector<double> run(5 * kSpu + d.samples_v.size(), 0.0);
  for (std::size_t b = 0; b < 5; ++b)
    for (std::size_t j = 0; j < d.samples_v.size(); ++j) run[b * kSpu + j] += d.samples_v[j];
  for (std::size_t i = 2 * kSpu; i < 4 * kSpu; ++i) CHECK(run[i] == doctest::Approx(1.2).epsilon(1e-12));

  const auto back = DriverWaveform::parse_csv(d.to_csv());
  CHECK(back.dt_s == doctest::Approx(d.dt_s).epsilon(1e-12));
  CHECK(back.bit_period_s == doctest::Approx(d.bit_period_s).epsilon(1e-12));
  REQUIRE(back.samples_v.size() == d.samples_v.size());
  for (std::size_t i = 0; i < d.samples_v.size(); ++i) CHECK(back.samples_v[i] == doctest::Approx(d.samples_v[i]));

  CHECK_THROWS_AS(DriverWaveform::parse_csv("# ui=4e-10\ntime_s,volts\n0,0\n1.3e-11,0.5\n2.6e-11,0.5\n"), Error);
  CHECK_THROWS_AS(DriverWaveform::parse_csv("time_s,volts\n0,0\n"), Error);
}

TEST_CASE("impulse_response") {
  SUBCASE("flat response is a delta") {
    const auto f = full_band();
    const std::vector<cplx> one(f.size(), cplx(1, 0));
    const auto ir = impulse_response(f, one, kDt, kUi);
    double total = 0.0;
    for (double v : ir.samples) total += v * v;
    CHECK(ir.samples[0] * ir.samples[0] >= 0.99 * total);
  }
  SUBCASE("delay moves the peak") {
    const auto f = grid(10e6, 10e6, 600);
    std::vector<cplx> d;
    for (double x : f) d.push_back(delay_factor(x, 1.3e-9));
    const auto ir = impulse_response(f, d, kDt, kUi);
    const auto it = std::max_element(ir.samples.begin(), ir.samples.end());
    const double t = ir.time_of(static_cast<std::size_t>(it - ir.samples.begin()));
    CHECK(std::abs(t - 1.3e-9) <= kDt);
    CHECK(ir.tapered);
    double total = 0.0;
    for (double v : ir.samples) total += v * v;
    CHECK(ir.acausal_energy_fraction < 0.01);
  }
  SUBCASE("single pole matches the sampled exponential") {
    const double f0 = 300e6;
    const auto f = full_band();
    std::vector<cplx> h;
    for (double x : f) h.push_back(1.0 / cplx(1.0, x / f0));
    const auto ir = impulse_response(f, h, kDt, kUi);
    const double a = 2.0 * std::numbers::pi * f0;
    const double peak = a * kDt;
    // Split a e^{-at} u(t) into a u(t), whose ideal low-pass samples are
    // a (1/2 + Si(pi n)/pi), and a continuous remainder a (e^{-at} - 1) u(t).
    double worst = 0.0;
    for (std::size_t n = 0; n < ir.size(); ++n) {
      const long long k = ir.offset_of(n);
      if (std::abs(k) > 400) continue;
      const double t = static_cast<double>(k) * kDt;
      double expect = a * (0.5 + si(std::numbers::pi * static_cast<double>(k)) / std::numbers::pi);
      if (k > 0) expect += a * (std::exp(-a * t) - 1.0);
      worst = std::max(worst, std::abs(ir.samples[n] - expect * kDt));
    }
    CHECK(worst < 0.01 * peak);
  }
  SUBCASE("too sparse a grid is an error") {
    const auto f = grid(400e6, 400e6, 15);
    const std::vector<cplx> one(f.size(), cplx(1, 0));
    CHECK_THROWS_AS(impulse_response(f, one, kDt, kUi), Error);
  }
  SUBCASE("band below 2/UI warns") {
    const auto f = grid(10e6, 10e6, 400);
    const std::vector<cplx> one(f.size(), cplx(1, 0));
    std::vector<std::string> warnings;
    impulse_response(f, one, kDt, kUi, {}, &warnings);
    CHECK(warnings.size() == 1);
  }
}

TEST_CASE("identity channel gives an unimpaired eye") {
  const auto eye = synthesize_eye(DiffBlock::through(full_band()), unit_driver(), prbs(7));
  CHECK(eye.trace_count() == 127);
  CHECK(eye.traces.front().size() == 2 * kSpu + 1);
  const auto m = extract_metrics(eye);
  CHECK(std::abs(m.eye_height_v - 1.0) < 1e-6);
  CHECK(m.jitter_ui < 1e-6);
  CHECK(m.eye_width_ui == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m.vertical_eye_noise_v < 1e-6);

  const auto empty = simulate_link(to_mixed_mode(testsupport::two_lines(
                                       full_band(), [](double) { return cplx(1, 0); }, [](double) { return cplx(1, 0); })),
                                   {}, unit_driver(), prbs(7));
  CHECK(std::abs(empty.eye_height_v - 1.0) < 1e-6);
}

TEST_CASE("pure delay leaves the eye unchanged") {
  const auto f = full_band();
  const auto ref = synthesize_eye(DiffBlock::through(f), unit_driver(), prbs(7));
  const auto del = synthesize_eye(DiffBlock::delay(f, 37 * kDt), unit_driver(), prbs(7));
  double worst = 0.0;
  for (std::size_t k = 0; k < ref.traces.size(); ++k)
    for (std::size_t j = 0; j < ref.traces[k].size(); ++j)
      worst = std::max(worst, std::abs(ref.traces[k][j] - del.traces[(k + 127 - 37 / kSpu) % 127][j]));
  // Traces may be rotated in pattern order; compare sorted centre values as well.
  std::vector<double> a, b;
  for (const auto& t : ref.traces) a.push_back(t[kSpu]);
  for (const auto& t : del.traces) b.push_back(t[kSpu]);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-6);

  // On a lossy band-limited channel a fractional delay moves no metric by more than 1e-4.
  const auto g = grid(10e6, 10e6, 600);
  const auto line = lossy_line(12.0, g);
  const auto m0 = extract_metrics(synthesize_eye(line, unit_driver(), prbs(7)));
  const auto m1 =
      extract_metrics(synthesize_eye(cascade_diff(line, DiffBlock::delay(g, 123.4e-12)), unit_driver(), prbs(7)));
  CHECK(std::abs(m0.eye_height_v - m1.eye_height_v) < 1e-4);
  CHECK(std::abs(m0.eye_width_ui - m1.eye_width_ui) < 1e-4);
  CHECK(std::abs(m0.jitter_ui - m1.jitter_ui) < 1e-4);
  CHECK(std::abs(m0.vertical_eye_noise_v - m1.vertical_eye_noise_v) < 1e-4);
}

TEST_CASE("superposition equals brute-force convolution") {
  const auto f = grid(10e6, 10e6, 600);
  const auto driver = unit_driver();
  const auto pattern = prbs(7);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ch = random_channel(seed, f);
    const auto ir = impulse_response(f, ch.s21(), driver.dt_s, driver.bit_period_s);
    const auto eye = fold_eye(pulse_response(ir, driver), driver, pattern);
    const auto brute = testsupport::brute_force_waveform(ir.samples, ir.negative_count, driver.samples_v, kSpu, pattern);
    REQUIRE(brute.size() == eye.waveform_v.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < brute.size(); ++i) worst = std::max(worst, std::abs(brute[i] - eye.waveform_v[i]));
    CHECK(worst < 1e-6);
    // Folded traces are windows of the same waveform.
    const std::size_t period = brute.size();
    for (std::size_t k = 0; k < eye.traces.size(); ++k)
      CHECK(eye.traces[k][0] == eye.waveform_v[(eye.window_start + k * kSpu) % period]);
  }
}

TEST_CASE("extract_metrics on hand-built eyes") {
  constexpr std::size_t spu = 20;
  SUBCASE("square wave") {
    const auto eye = hand_eye(spu, {ramp_trace(spu, 10.0, true), ramp_trace(spu, 10.0, false),
                                    std::vector<double>(2 * spu + 1, 1.0), std::vector<double>(2 * spu + 1, 0.0)});
    // The ramp traces touch their rails within one sample of the crossing.
    const auto m = extract_metrics(eye);
    CHECK(m.eye_height_v == doctest::Approx(1.0));
    CHECK(m.eye_width_ui == doctest::Approx(1.0));
    CHECK(m.jitter_ui == doctest::Approx(0.0));
    CHECK(m.vertical_eye_noise_v == doctest::Approx(0.0));
  }
  SUBCASE("crossings at 0.45 and 0.55 UI") {
    const auto eye = hand_eye(spu, {ramp_trace(spu, 9.0, true), ramp_trace(spu, 11.0, false)});
    const auto m = extract_metrics(eye);
    CHECK(m.jitter_ui == doctest::Approx(0.10));
    CHECK(m.eye_width_ui == doctest::Approx(0.90));
    CHECK(m.eye_height_v == doctest::Approx(1.0));
  }
  SUBCASE("no crossings") {
    const auto eye = hand_eye(spu, {std::vector<double>(2 * spu + 1, 0.9), std::vector<double>(2 * spu + 1, 0.1)});
    CHECK_THROWS_WITH_AS(extract_metrics(eye), doctest::Contains("eye collapsed"), Error);
  }
}

TEST_CASE("eye invariants and trends") {
  const auto g = grid(10e6, 10e6, 600);
  const auto driver = DriverWaveform::trapezoid(kUi, kSpu, 1.2, 40e-12);
  double prev = 2.0;
  for (double len : {5.0, 10.0, 20.0, 30.0}) {
    const auto m = extract_metrics(synthesize_eye(lossy_line(len, g), driver, prbs(7)));
    CHECK(m.eye_height_v <= prev + 1e-12);
    CHECK(m.eye_height_v <= 1.2);
    CHECK(m.eye_width_ui >= 0.0);
    CHECK(m.eye_width_ui <= 1.0);
    CHECK(m.jitter_ui >= 0.0);
    prev = m.eye_height_v;
  }

  DriverWaveform inverted = driver;
  for (double& v : inverted.samples_v) v = -v;
  const auto line = lossy_line(15.0, g);
  const auto a = extract_metrics(synthesize_eye(line, driver, prbs(7)));
  const auto b = extract_metrics(synthesize_eye(line, inverted, prbs(7)));
  CHECK(b.eye_height_v == doctest::Approx(a.eye_height_v).epsilon(1e-9));
  CHECK(b.eye_width_ui == doctest::Approx(a.eye_width_ui).epsilon(1e-9));
  CHECK(b.jitter_ui == doctest::Approx(a.jitter_ui).epsilon(1e-9));
  CHECK(b.vertical_eye_noise_v == doctest::Approx(a.vertical_eye_noise_v).epsilon(1e-9));

  const std::vector<std::uint8_t> short_pattern(100, 1);
  CHECK_THROWS_AS(synthesize_eye(line, driver, short_pattern), Error);
}

TEST_CASE("simulate_link: split components and throughput") {
  const auto g = grid(10e6, 10e6, 601);
  const auto driver = DriverWaveform::trapezoid(kUi, kSpu, 1.2, 40e-12);
  NetModelParams p;
  p.p = {52.0, 1.5e-9, 10.0, 0.09, 0.06, 0.0};
  p.n = p.p;
  p.n.tau_s += 6e-12;
  const auto pwb = to_mixed_mode(net_model(p, g));

  const auto whole = lossy_line(8.0, g);
  const auto half = lossy_line(4.0, g);
  LinkComponents one{{whole}, {}};
  LinkComponents two{{half, half}, {}};
  // Splitting needs the halves to compose to the whole; check that first.
  const auto composed = cascade_diff(half, half);
  double mismatch = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    mismatch = std::max(mismatch, std::abs(composed.s[k](1, 0) - whole.s[k](1, 0)));
  if (mismatch < 1e-9) {
    const auto a = simulate_link(pwb, one, driver, prbs(7));
    const auto b = simulate_link(pwb, two, driver, prbs(7));
    CHECK(std::abs(a.eye_height_v - b.eye_height_v) < 1e-6);
    CHECK(std::abs(a.eye_width_ui - b.eye_width_ui) < 1e-4);
  }
  // A chain of the same blocks in different groupings is exact regardless.
  LinkComponents grouped{{composed}, {}};
  const auto a = simulate_link(pwb, two, driver, prbs(7));
  const auto b = simulate_link(pwb, grouped, driver, prbs(7));
  CHECK(std::abs(a.eye_height_v - b.eye_height_v) < 1e-6);
  CHECK(std::abs(a.eye_width_ui - b.eye_width_ui) < 1e-4);
  CHECK(std::abs(a.jitter_ui - b.jitter_ui) < 1e-4);
  CHECK(std::abs(a.vertical_eye_noise_v - b.vertical_eye_noise_v) < 1e-6);

  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kRuns = 5;
  for (int i = 0; i < kRuns; ++i) simulate_link(pwb, one, driver, prbs(7));
  const double per_net = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / kRuns;
  CHECK(per_net < 1.0);
}

TEST_CASE("eye_csv layout") {
  const auto eye = synthesize_eye(DiffBlock::through(full_band()), unit_driver(), prbs(7));
  const auto csv = eye_csv(eye);
  CHECK(csv.rfind("t_ui,0,", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == eye.trace_count() + 1);
}
