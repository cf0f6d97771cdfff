#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sivar {

struct StatSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // n - 1 denominator
  double min = 0.0;
  double max = 0.0;
  /// Population-moment shape statistics; empty for constant data.
  std::optional<double> skewness;
  std::optional<double> kurtosis;  // non-excess, 3 for a Gaussian
};

/// Throws for fewer than 2 values or non-finite input.
StatSummary summarize(std::span<const double> values);

struct PooledResult {
  double sigma = 0.0;
  std::size_t groups_used = 0;
  std::size_t groups_dropped = 0;  // fewer than 2 observations
  std::size_t observations = 0;    // in the groups used
};

/// sqrt(sum (n_i - 1) s_i^2 / sum (n_i - 1)). Throws "no group with n >= 2" when nothing remains.
PooledResult pooled_snv(const std::vector<std::vector<double>>& groups);

struct DeflateResult {
  double sigma = 0.0;
  bool tester_dominated = false;
};

/// Removes tester variance: sqrt(max(0, meas^2 - tester^2)).
DeflateResult deflate_tester(double sigma_meas, double sigma_tester);

struct PredictorSpec {
  enum class Kind { Continuous, Categorical };

  std::string name;
  Kind kind = Kind::Continuous;
  std::vector<double> values;       // continuous
  std::vector<std::string> levels;  // categorical, one label per observation

  static PredictorSpec continuous(std::string name, std::vector<double> values);
  static PredictorSpec categorical(std::string name, std::vector<std::string> levels);
  std::size_t size() const { return kind == Kind::Continuous ? values.size() : levels.size(); }
};

struct AnovaTerm {
  std::string name;
  std::size_t df_num = 0;
  double mse_ratio = 1.0;  // SSE without the term over SSE of the full model
  double f_stat = 0.0;     // classical partial F
  double p_value = 1.0;
};

struct AnovaResult {
  std::vector<std::string> coefficient_names;  // "(intercept)", "length", "core=3", ...
  std::vector<double> coefficients;
  double sse = 0.0;
  double residual_mse = 0.0;
  std::size_t residual_df = 0;
  std::vector<AnovaTerm> terms;  // one per predictor, input order
};

/// Main-effects least-squares model with nested-refit tests per predictor.
///
/// Categorical predictors are one-hot encoded with the lexicographically
/// smallest level as the reference. A rank-deficient design is an error naming
/// the first term that adds no new column space. With zero residual, a term
/// whose removal raises the SSE gets f = +inf and p = 0.
AnovaResult anova(std::span<const double> outcome, const std::vector<PredictorSpec>& predictors);

/// Upper tail P(F > f) of the F distribution.
double f_upper_tail(double f, double df1, double df2);

/// Standard normal lower-tail probability.
double normal_cdf(double x);

/// (mu - k sigma, mu + k sigma).
std::pair<double, double> k_sigma_interval(double mu, double sigma, double k = 5.0);

/// Fraction of a Gaussian population below mu + k sigma.
double compliance_fraction(double k);
/// Fraction of a Gaussian population within mu +/- k sigma.
double compliance_fraction_two_sided(double k);

struct SampleSizeRow {
  std::size_t n = 0;
  std::size_t trials = 0;
  double min_rel_error = 0.0;  // of sigma_hat / sigma_pool - 1
  double max_rel_error = 0.0;
  double max_abs_rel_error = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

/// For each size, `trials` subsets drawn without replacement; relative error of
/// the subset standard deviation against the pool's (both n - 1 denominators).
std::vector<SampleSizeRow> sample_size_experiment(std::span<const double> pool, std::span<const std::size_t> sizes,
                                                  std::size_t trials, std::uint64_t seed);

}  // namespace sivar
