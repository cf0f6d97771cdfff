#include "sivar/stats.hpp"

#include "sivar/error.hpp"
#include "sivar/rng.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace sivar {

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return (1.0 - t) * v[lo] + t * v[hi];
}

double sample_std(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct Design {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
  std::vector<std::pair<std::size_t, std::size_t>> term_cols;  // [begin, end) per predictor
};

Design build_design(std::size_t n, const std::vector<PredictorSpec>& predictors) {
  std::vector<std::vector<double>> cols{std::vector<double>(n, 1.0)};
  Design d;
  d.names.push_back("(intercept)");
  for (const auto& p : predictors) {
    if (p.size() != n) throw Error("anova: predictor '" + p.name + "' has " + std::to_string(p.size()) +
                                   " values, outcome has " + std::to_string(n));
    const std::size_t begin = cols.size();
    if (p.kind == PredictorSpec::Kind::Continuous) {
      for (double v : p.values)
        if (!std::isfinite(v)) throw Error("anova: predictor '" + p.name + "' has a non-finite value");
      cols.push_back(p.values);
      d.names.push_back(p.name);
    } else {
      std::map<std::string, std::size_t> levels;
      for (const auto& l : p.levels) levels.emplace(l, 0);
      if (levels.size() < 2) throw Error("anova: categorical predictor '" + p.name + "' has fewer than 2 levels");
      auto it = levels.begin();
      for (++it; it != levels.end(); ++it) {
        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (p.levels[i] == it->first) c[i] = 1.0;
        cols.push_back(std::move(c));
        d.names.push_back(p.name + "=" + it->first);
      }
    }
    d.term_cols.emplace_back(begin, cols.size());
  }
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  return d;
}

Eigen::Index rank_of(const Eigen::MatrixXd& x) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  return qr.rank();
}

struct Fit {
  Eigen::VectorXd beta;
  double sse = 0.0;
};

Fit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  Fit f;
  f.beta = qr.solve(y);
  f.sse = (y - x * f.beta).squaredNorm();
  return f;
}

Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& x, std::size_t begin, std::size_t end) {
  const auto b = static_cast<Eigen::Index>(begin);
  const auto e = static_cast<Eigen::Index>(end);
  Eigen::MatrixXd r(x.rows(), x.cols() - (e - b));
  r.leftCols(b) = x.leftCols(b);
  r.rightCols(x.cols() - e) = x.rightCols(x.cols() - e);
  return r;
}

}  // namespace

StatSummary summarize(std::span<const double> values) {
  if (values.size() < 2) throw Error("summarize: need at least 2 values");
  StatSummary s;
  s.n = values.size();
  s.min = values[0];
  s.max = values[0];
  const double shift = values[0];
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("summarize: non-finite value");
    sum += v - shift;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  const double n = static_cast<double>(s.n);
  const double shifted_mean = sum / n;
  s.mean = shift + shifted_mean;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = (v - shift) - shifted_mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  s.std = std::sqrt(m2 / (n - 1.0));
  s.mean = std::clamp(s.mean, s.min, s.max);
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0 && s.max > s.min) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2);
  }
  return s;
}

PooledResult pooled_snv(const std::vector<std::vector<double>>& groups) {
  PooledResult r;
  double num = 0.0, den = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) {
      ++r.groups_dropped;
      continue;
    }
    // Shifting by the first value keeps identical groups at exactly zero.
    const double shift = g.front();
    double mean = 0.0;
    for (double v : g) mean += v - shift;
    mean /= static_cast<double>(g.size());
    double ss = 0.0;
    for (double v : g) ss += (v - shift - mean) * (v - shift - mean);
    num += ss;
    den += static_cast<double>(g.size() - 1);
    ++r.groups_used;
    r.observations += g.size();
  }
  if (r.groups_used == 0) throw Error("pooled_snv: no group with n >= 2");
  r.sigma = std::sqrt(num / den);
  return r;
}

DeflateResult deflate_tester(double sigma_meas, double sigma_tester) {
  if (sigma_meas < 0.0 || sigma_tester < 0.0) throw Error("deflate_tester: sigmas must be non-negative");
  DeflateResult r;
  r.tester_dominated = sigma_tester >= sigma_meas;
  r.sigma = std::sqrt(std::max(0.0, sigma_meas * sigma_meas - sigma_tester * sigma_tester));
  return r;
}

PredictorSpec PredictorSpec::continuous(std::string name, std::vector<double> values) {
  PredictorSpec p;
  p.name = std::move(name);
  p.kind = Kind::Continuous;
  p.values = std::move(values);
  return p;
}

PredictorSpec PredictorSpec::categorical(std::string name, std::vector<std::string> levels) {
  PredictorSpec p;
  p.name = std::move(name);
  p.kind = Kind::Categorical;
  p.levels = std::move(levels);
  return p;
}

AnovaResult anova(std::span<const double> outcome, const std::vector<PredictorSpec>& predictors) {
  const std::size_t n = outcome.size();
  for (double v : outcome)
    if (!std::isfinite(v)) throw Error("anova: non-finite outcome value");
  const Design d = build_design(n, predictors);
  const auto p = static_cast<std::size_t>(d.x.cols());
  if (n <= p) throw Error("anova: need more observations (" + std::to_string(n) + ") than model columns (" +
                          std::to_string(p) + ")");

  // Add terms one at a time so the error can name the aliased one.
  for (std::size_t t = 0; t < d.term_cols.size(); ++t) {
    const auto end = static_cast<Eigen::Index>(d.term_cols[t].second);
    if (rank_of(d.x.leftCols(end)) < end)
      throw Error("anova: design is rank deficient; term '" + predictors[t].name + "' is aliased with earlier terms");
  }

  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(outcome.data(), static_cast<Eigen::Index>(n));
  const Fit full = least_squares(d.x, y);

  AnovaResult r;
  r.coefficient_names = d.names;
  r.coefficients.assign(full.beta.data(), full.beta.data() + full.beta.size());
  r.residual_df = n - p;
  r.sse = full.sse;
  r.residual_mse = full.sse / static_cast<double>(r.residual_df);

  // Residuals at rounding level count as an exact fit.
  const double scale = std::max(y.squaredNorm(), std::numeric_limits<double>::min());
  const double zero_sse = 1e-20 * scale;
  const bool exact_fit = full.sse <= zero_sse;

  for (std::size_t t = 0; t < d.term_cols.size(); ++t) {
    const auto [b, e] = d.term_cols[t];
    const Fit red = least_squares(drop_columns(d.x, b, e), y);
    AnovaTerm term;
    term.name = predictors[t].name;
    term.df_num = e - b;
    if (exact_fit) {
      if (red.sse <= zero_sse) {
        term.mse_ratio = 1.0;
        term.f_stat = 0.0;
        term.p_value = 1.0;
      } else {
        term.mse_ratio = std::numeric_limits<double>::infinity();
        term.f_stat = std::numeric_limits<double>::infinity();
        term.p_value = 0.0;
      }
    } else {
      term.mse_ratio = red.sse / full.sse;
      const double extra = std::max(0.0, red.sse - full.sse);
      term.f_stat = (extra / static_cast<double>(term.df_num)) / r.residual_mse;
      term.p_value = f_upper_tail(term.f_stat, static_cast<double>(term.df_num), static_cast<double>(r.residual_df));
    }
    r.terms.push_back(term);
  }
  return r;
}

double f_upper_tail(double f, double df1, double df2) {
  if (std::isinf(f)) return 0.0;
  if (!(f > 0.0)) return 1.0;
  const boost::math::fisher_f dist(df1, df2);
  return std::clamp(boost::math::cdf(boost::math::complement(dist, f)), 0.0, 1.0);
}

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }

std::pair<double, double> k_sigma_interval(double mu, double sigma, double k) {
  if (sigma < 0.0) throw Error("k_sigma_interval: sigma must be non-negative");
  return {mu - k * sigma, mu + k * sigma};
}

double compliance_fraction(double k) { return normal_cdf(k); }

double compliance_fraction_two_sided(double k) { return 1.0 - 2.0 * normal_cdf(-k); }

std::vector<SampleSizeRow> sample_size_experiment(std::span<const double> pool, std::span<const std::size_t> sizes,
                                                  std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw Error("sample_size_experiment: trials must be >= 1");
  if (pool.size() < 2) throw Error("sample_size_experiment: pool needs at least 2 values");
  const double sigma_pool = sample_std(pool);
  if (!(sigma_pool > 0.0)) throw Error("sample_size_experiment: pool has zero spread");

  std::vector<SampleSizeRow> out;
  std::vector<double> subset;
  std::vector<std::size_t> index(pool.size());
  for (std::size_t n : sizes) {
    if (n < 2) throw Error("sample_size_experiment: sizes must be >= 2");
    if (n > pool.size())
      throw Error("sample_size_experiment: size " + std::to_string(n) + " exceeds pool of " +
                  std::to_string(pool.size()));
    std::vector<double> rel(trials);
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(seed, {n, t});
      std::iota(index.begin(), index.end(), std::size_t{0});
      subset.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.below(pool.size() - i);
        std::swap(index[i], index[j]);
        subset[i] = pool[index[i]];
      }
      rel[t] = sample_std(subset) / sigma_pool - 1.0;
    }
    SampleSizeRow row;
    row.n = n;
    row.trials = trials;
    std::sort(rel.begin(), rel.end());
    row.min_rel_error = rel.front();
    row.max_rel_error = rel.back();
    row.max_abs_rel_error = std::max(std::abs(rel.front()), std::abs(rel.back()));
    row.q05 = quantile_sorted(rel, 0.05);
    row.q50 = quantile_sorted(rel, 0.50);
    row.q95 = quantile_sorted(rel, 0.95);
    out.push_back(row);
  }
  return out;
}

}  // namespace sivar
