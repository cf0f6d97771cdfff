#include "support.hpp"

#include "sivar/error.hpp"
#include "sivar/rng.hpp"
#include "sivar/stats.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

using namespace sivar;

namespace {

// P(F > f) by integrating the density on [f, inf).
double f_tail_quadrature(double f, double d1, double d2) {
  const double log_norm = std::lgamma((d1 + d2) / 2) - std::lgamma(d1 / 2) - std::lgamma(d2 / 2) +
                          (d1 / 2) * std::log(d1 / d2);
  auto density = [&](double u) {
    const double x = f + u;
    if (x <= 0.0) return 0.0;
    return std::exp(log_norm + (d1 / 2 - 1) * std::log(x) - ((d1 + d2) / 2) * std::log1p(d1 * x / d2));
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(density, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
}

std::vector<std::string> labels(std::size_t n, std::size_t levels, const char* prefix, Rng& rng) {
  std::vector<std::string> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = prefix + std::to_string(i < levels ? i : rng.below(levels));
  return out;
}

}  // namespace

TEST_CASE("summarize") {
  const std::vector<double> triple{1, 2, 3};
  const auto s = summarize(triple);
  CHECK(s.n == 3);
  CHECK(s.mean == 2.0);
  CHECK(s.std == doctest::Approx(1.0));
  CHECK(s.min == 1.0);
  CHECK(s.max == 3.0);
  REQUIRE(s.skewness.has_value());
  CHECK(*s.skewness == doctest::Approx(0.0));
  REQUIRE(s.kurtosis.has_value());
  CHECK(*s.kurtosis == doctest::Approx((2.0 / 3.0) / (4.0 / 9.0)));
  CHECK(*s.kurtosis == doctest::Approx(1.5));

  const std::vector<double> flat{4, 4, 4, 4};
  const auto c = summarize(flat);
  CHECK(c.std == 0.0);
  CHECK_FALSE(c.skewness.has_value());
  CHECK_FALSE(c.kurtosis.has_value());

  CHECK_THROWS_AS(summarize(std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(summarize(std::vector<double>{1.0, std::nan("")}), Error);

  Rng rng(2024);
  std::vector<double> big(1'000'000);
  for (double& v : big) v = rng.normal();
  const auto g = summarize(big);
  CHECK(std::abs(*g.skewness) < 0.01);
  CHECK(std::abs(*g.kurtosis - 3.0) < 0.05);
  CHECK(g.min <= g.mean);
  CHECK(g.mean <= g.max);
}

TEST_CASE("pooled_snv") {
  SUBCASE("equal variances") {
    const auto r = pooled_snv({{1, 3}, {10, 12}, {-5, -3}});
    CHECK(r.sigma == doctest::Approx(std::sqrt(2.0)));
    CHECK(r.groups_used == 3);
    CHECK(r.observations == 6);
  }
  SUBCASE("weighted arithmetic") {
    // Variances 1 and 3 with three observations each.
    const double a = std::sqrt(3.0);
    const auto r = pooled_snv({{-1, 0, 1}, {-a, 0, a}});
    CHECK(r.sigma * r.sigma == doctest::Approx(2.0));
    CHECK(r.sigma == doctest::Approx(1.414).epsilon(1e-3));
  }
  SUBCASE("small groups are dropped and counted") {
    const auto r = pooled_snv({{1, 2, 3}, {7}});
    CHECK(r.groups_used == 1);
    CHECK(r.groups_dropped == 1);
    CHECK_THROWS_WITH_AS(pooled_snv({{1}, {2}}), doctest::Contains("no group with n >= 2"), Error);
  }
  SUBCASE("blocking: per-net shifts do not change sigma") {
    Rng rng(5);
    std::vector<std::vector<double>> groups(50);
    for (auto& g : groups)
      for (int b = 0; b < 6; ++b) g.push_back(rng.normal(0, 2));
    const double base = pooled_snv(groups).sigma;
    for (std::size_t i = 0; i < groups.size(); ++i)
      for (double& v : groups[i]) v += 10.0 * static_cast<double>(i);
    CHECK(std::abs(pooled_snv(groups).sigma - base) <= 1e-12 * base * 100);
  }
}

TEST_CASE("deflate_tester") {
  const auto d = deflate_tester(0.024, 0.010);
  CHECK(d.sigma == doctest::Approx(std::sqrt(0.024 * 0.024 - 0.010 * 0.010)));
  CHECK(d.sigma == doctest::Approx(0.0218).epsilon(1e-3));
  CHECK_FALSE(d.tester_dominated);
  CHECK(deflate_tester(0.3, 0.0).sigma == 0.3);
  const auto eq = deflate_tester(0.05, 0.05);
  CHECK(eq.sigma == 0.0);
  CHECK(eq.tester_dominated);
}

TEST_CASE("anova: hand one-way case") {
  const std::vector<double> y{0, 2, 1, 3};
  const auto r = anova(y, {PredictorSpec::categorical("g", {"A", "A", "B", "B"})});
  REQUIRE(r.terms.size() == 1);
  CHECK(r.terms[0].df_num == 1);
  CHECK(r.residual_df == 2);
  CHECK(r.sse == doctest::Approx(4.0));
  CHECK(r.terms[0].f_stat == doctest::Approx(0.5));
  // F(1, 2) is the square of Student t with 2 df: P(F > x) = 1 - sqrt(x / (x + 2)).
  CHECK(r.terms[0].p_value == doctest::Approx(1.0 - std::sqrt(0.5 / 2.5)).epsilon(1e-12));
  CHECK(r.terms[0].mse_ratio == doctest::Approx(5.0 / 4.0));
  CHECK(r.coefficient_names[0] == "(intercept)");
}

TEST_CASE("anova: noise-free dependence and junk term") {
  Rng rng(9);
  std::vector<double> len, y;
  std::vector<std::string> junk;
  for (int i = 0; i < 60; ++i) {
    len.push_back(rng.uniform(1.7, 32.8));
    y.push_back(0.4 + 0.02 * len.back());
    junk.push_back(i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c"));
  }
  const auto r = anova(y, {PredictorSpec::continuous("length", len), PredictorSpec::categorical("junk", junk)});
  CHECK(std::isinf(r.terms[0].f_stat));
  CHECK(r.terms[0].p_value == 0.0);
  CHECK(std::abs(r.terms[1].mse_ratio - 1.0) < 1e-9);
  CHECK(r.residual_mse >= 0.0);
}

TEST_CASE("anova: rank deficiency names the aliased term") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  const std::vector<double> y{1, 3, 2, 5, 4, 6};
  CHECK_THROWS_WITH_AS(anova(y, {PredictorSpec::continuous("a", x), PredictorSpec::continuous("a_copy", x)}),
                       doctest::Contains("a_copy"), Error);
  CHECK_THROWS_AS(anova(y, {PredictorSpec::categorical("one", {"x", "x", "x", "x", "x", "x"})}), Error);
}

TEST_CASE("anova: null model calibration and scale invariance") {
  constexpr std::size_t kObs = 200;
  constexpr int kSeeds = 1000;
  std::vector<double> f_len, f_core, p_len, p_core;
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed), {77});
    std::vector<double> y(kObs), len(kObs);
    for (std::size_t i = 0; i < kObs; ++i) {
      y[i] = rng.normal();
      len[i] = rng.uniform(1.7, 32.8);
    }
    const auto core = labels(kObs, 8, "c", rng);
    const auto r = anova(y, {PredictorSpec::continuous("length", len), PredictorSpec::categorical("core", core)});
    f_len.push_back(r.terms[0].f_stat);
    f_core.push_back(r.terms[1].f_stat);
    p_len.push_back(r.terms[0].p_value);
    p_core.push_back(r.terms[1].p_value);
    for (const auto& t : r.terms) {
      CHECK(t.p_value >= 0.0);
      CHECK(t.p_value <= 1.0);
      CHECK(t.mse_ratio >= 1.0 - 1e-12);
    }
  }
  const double mean_len = std::accumulate(f_len.begin(), f_len.end(), 0.0) / kSeeds;
  const double mean_core = std::accumulate(f_core.begin(), f_core.end(), 0.0) / kSeeds;
  CHECK(std::abs(mean_len - 1.0) < 0.15);
  CHECK(std::abs(mean_core - 1.0) < 0.15);
  CHECK(testsupport::ks_uniform_pvalue(p_len) > 0.01);
  CHECK(testsupport::ks_uniform_pvalue(p_core) > 0.01);

  Rng rng(31);
  std::vector<double> y(120), len(120);
  for (std::size_t i = 0; i < y.size(); ++i) {
    len[i] = rng.uniform(2, 30);
    y[i] = 0.1 * len[i] + rng.normal();
  }
  const auto serial = labels(y.size(), 6, "SN", rng);
  const std::vector<PredictorSpec> preds{PredictorSpec::continuous("length", len),
                                         PredictorSpec::categorical("serial", serial)};
  const auto a = anova(y, preds);
  std::vector<double> y2 = y;
  for (double& v : y2) v *= 37.5;
  const auto b = anova(y2, preds);
  for (std::size_t t = 0; t < a.terms.size(); ++t) {
    CHECK(std::abs(b.terms[t].mse_ratio / a.terms[t].mse_ratio - 1.0) < 1e-9);
    CHECK(std::abs(b.terms[t].f_stat / a.terms[t].f_stat - 1.0) < 1e-9);
    CHECK(std::abs(b.terms[t].p_value - a.terms[t].p_value) <= 1e-9 * std::max(1.0, a.terms[t].p_value));
  }
  for (std::size_t c = 0; c < a.coefficients.size(); ++c)
    CHECK(b.coefficients[c] == doctest::Approx(37.5 * a.coefficients[c]).epsilon(1e-9));
}

TEST_CASE("anova: residual MSE separates systematic from random variation") {
  constexpr std::size_t n = 10'000;
  Rng rng(12);
  std::vector<double> y(n), len(n);
  for (std::size_t i = 0; i < n; ++i) {
    len[i] = rng.uniform(1.7, 32.8);
    y[i] = 0.5 + 0.3 * len[i] + rng.normal();
  }
  const auto r = anova(y, {PredictorSpec::continuous("length", len)});
  CHECK(std::abs(r.residual_mse - 1.0) < 0.05);
  const auto s = summarize(y);
  const double systematic = 0.09 * (31.1 * 31.1 / 12.0);
  CHECK(s.std * s.std == doctest::Approx(1.0 + systematic).epsilon(0.05));
}

TEST_CASE("F upper tail against quadrature") {
  for (auto [d1, d2, f] : {std::tuple{1.0, 2.0, 0.5}, std::tuple{3.0, 100.0, 2.6}, std::tuple{5.0, 11000.0, 31.0}})
    CHECK(std::abs(f_upper_tail(f, d1, d2) - f_tail_quadrature(f, d1, d2)) < 1e-6);
  CHECK(f_upper_tail(0.0, 3, 10) == 1.0);
  CHECK(f_upper_tail(std::numeric_limits<double>::infinity(), 3, 10) == 0.0);
}

TEST_CASE("k-sigma interval and compliance") {
  const auto [lo, hi] = k_sigma_interval(0.783, 0.022);
  CHECK((hi - lo) / 2 == doctest::Approx(0.110));
  CHECK((hi - lo) / 2 / 0.783 == doctest::Approx(0.14).epsilon(0.01));
  const auto [a, b] = k_sigma_interval(1.5, 0.0);
  CHECK(a == 1.5);
  CHECK(b == 1.5);
  CHECK(compliance_fraction(4.0) == doctest::Approx(0.9999683).epsilon(1e-7));
  CHECK(compliance_fraction_two_sided(4.0) == doctest::Approx(1.0 - 2.0 * (1.0 - 0.99996833)).epsilon(1e-7));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
}

TEST_CASE("sample_size_experiment") {
  Rng rng(4);
  std::vector<double> pool(2077);
  for (double& v : pool) v = rng.normal(0.0, 7.2);

  const std::vector<std::size_t> full{pool.size()};
  for (const auto& row : sample_size_experiment(pool, full, 20, 1)) {
    CHECK(std::abs(row.max_abs_rel_error) < 1e-12);
    CHECK(row.trials == 20);
  }

  const std::vector<std::size_t> too_big{3000};
  CHECK_THROWS_AS(sample_size_experiment(pool, too_big, 5, 1), Error);

  const std::vector<std::size_t> sizes{10, 30, 100, 300, 1000, 2000};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto rows = sample_size_experiment(pool, sizes, 500, seed);
    REQUIRE(rows.size() == sizes.size());
    int inversions = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double w0 = rows[i - 1].max_rel_error - rows[i - 1].min_rel_error;
      const double w1 = rows[i].max_rel_error - rows[i].min_rel_error;
      if (w1 > w0) ++inversions;
      CHECK(rows[i].q05 <= rows[i].q50);
      CHECK(rows[i].q50 <= rows[i].q95);
    }
    CHECK(inversions <= 1);
  }

  // Bit-reproducible for a seed.
  const auto x = sample_size_experiment(pool, sizes, 50, 3);
  const auto y = sample_size_experiment(pool, sizes, 50, 3);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].q50 == y[i].q50);
}
