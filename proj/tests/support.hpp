#pragma once

#include "sivar/sparams.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

namespace testsupport {

using sivar::cplx;

inline std::vector<double> grid(double start_hz, double step_hz, std::size_t count) {
  std::vector<double> f(count);
  for (std::size_t k = 0; k < count; ++k) f[k] = start_hz + step_hz * static_cast<double>(k);
  return f;
}

inline cplx delay_factor(double f_hz, double tau_s) {
  return std::polar(1.0, -2.0 * std::numbers::pi * f_hz * tau_s);
}

/// Uncoupled P/N through paths with the given transmission series; no reflections.
inline sivar::NetworkData two_lines(const std::vector<double>& f, auto&& s21p, auto&& s43n) {
  sivar::NetworkData net;
  net.freqs_hz = f;
  for (double x : f) {
    sivar::SMatrix4 s = sivar::SMatrix4::Zero();
    s(1, 0) = s(0, 1) = s21p(x);
    s(3, 2) = s(2, 3) = s43n(x);
    net.s.push_back(s);
  }
  return net;
}

/// Kolmogorov-Smirnov p-value for uniformity on [0, 1] (asymptotic series with small-n correction).
inline double ks_uniform_pvalue(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  const double en = std::sqrt(n);
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Steady-state far-end waveform by direct convolution of a long repeated bit stream.
/// Index i of the result is time i * dt within one pattern period, bit 0 starting at 0.
inline std::vector<double> brute_force_waveform(const std::vector<double>& impulse, std::size_t negative_count,
                                                const std::vector<double>& pulse, std::size_t samples_per_ui,
                                                const std::vector<std::uint8_t>& pattern) {
  const std::size_t period = pattern.size() * samples_per_ui;
  const std::size_t n = impulse.size();
  const std::size_t reps = (n + pulse.size()) / period + 3;
  std::vector<double> x(reps * period + pulse.size(), 0.0);
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t k = 0; k < pattern.size(); ++k)
      if (pattern[k])
        for (std::size_t j = 0; j < pulse.size(); ++j) x[r * period + k * samples_per_ui + j] += pulse[j];

  // Evaluate one period before the last, so both tails of the impulse see a full stream.
  const std::size_t base = (reps - 2) * period;
  std::vector<double> y(period, 0.0);
  for (std::size_t i = 0; i < period; ++i) {
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      // impulse sample m sits at signed offset m (or m - n for the wrapped tail)
      const long long off = m < n - negative_count ? static_cast<long long>(m) : static_cast<long long>(m) - static_cast<long long>(n);
      const long long src = static_cast<long long>(base + i) - off;
      if (src >= 0 && src < static_cast<long long>(x.size())) acc += impulse[m] * x[static_cast<std::size_t>(src)];
    }
    y[i] = acc;
  }
  return y;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sivar_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
