#include "sivar/spectral.hpp"

#include "sivar/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace sivar {

namespace {

// FFTW's planner is not re-entrant; execution with the new-array interface is.
// Plans use FFTW_ESTIMATE so they do not depend on timing and are reproducible.
std::mutex g_plan_mutex;

struct PlanCache {
  std::map<std::size_t, fftw_plan> c2r;
  std::map<std::size_t, fftw_plan> r2c;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(count, 1)));
  if (!p) throw Error("fftw_malloc failed");
  return FftwBuffer<T>(p);
}

fftw_plan c2r_plan(std::size_t n) {
  std::lock_guard lock(g_plan_mutex);
  auto& cache = plans().c2r;
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  auto in = fftw_buffer<fftw_complex>(n / 2 + 1);
  auto out = fftw_buffer<double>(n);
  fftw_plan p = fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  if (!p) throw Error("fftw planning failed");
  cache.emplace(n, p);
  return p;
}

fftw_plan r2c_plan(std::size_t n) {
  std::lock_guard lock(g_plan_mutex);
  auto& cache = plans().r2c;
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(n / 2 + 1);
  fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  if (!p) throw Error("fftw planning failed");
  cache.emplace(n, p);
  return p;
}

}  // namespace

double ImpulseResponse::time_of(std::size_t n) const { return static_cast<double>(offset_of(n)) * dt_s; }

long long ImpulseResponse::offset_of(std::size_t n) const {
  const auto sn = static_cast<long long>(n);
  return n >= samples.size() - negative_count ? sn - static_cast<long long>(samples.size()) : sn;
}

double mean_step(std::span<const double> freqs_hz, bool* uniform) {
  if (freqs_hz.size() < 2) throw Error("grid needs at least 2 points");
  const double step = (freqs_hz.back() - freqs_hz.front()) / static_cast<double>(freqs_hz.size() - 1);
  if (uniform) {
    *uniform = true;
    for (std::size_t k = 1; k < freqs_hz.size(); ++k) {
      if (std::abs((freqs_hz[k] - freqs_hz[k - 1]) - step) > 1e-6 * step) {
        *uniform = false;
        break;
      }
    }
  }
  return step;
}

std::vector<double> inverse_real_dft(std::span<const cplx> half_spectrum, std::size_t n) {
  if (half_spectrum.size() != n / 2 + 1) throw Error("inverse_real_dft: expected n/2+1 bins");
  fftw_plan plan = c2r_plan(n);
  auto in = fftw_buffer<fftw_complex>(n / 2 + 1);
  auto out = fftw_buffer<double>(n);
  for (std::size_t k = 0; k < half_spectrum.size(); ++k) {
    in[k][0] = half_spectrum[k].real();
    in[k][1] = half_spectrum[k].imag();
  }
  fftw_execute_dft_c2r(plan, in.get(), out.get());
  std::vector<double> result(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) result[i] = out[i] * scale;
  return result;
}

std::vector<cplx> forward_real_dft(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n == 0) return {};
  fftw_plan plan = r2c_plan(n);
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(n / 2 + 1);
  std::copy(samples.begin(), samples.end(), in.get());
  fftw_execute_dft_r2c(plan, in.get(), out.get());
  std::vector<cplx> result(n / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out[k][0], out[k][1]};
  return result;
}

ImpulseResponse impulse_on_uniform_grid(std::span<const double> freqs_hz, std::span<const cplx> response,
                                        std::size_t n, double dt_s, const SpectrumOptions& options) {
  if (freqs_hz.size() < 2 || freqs_hz.size() != response.size())
    throw Error("impulse: need matching frequency and response arrays of at least 2 points");
  if (n < 4 || n % 2 != 0) throw Error("impulse: transform length must be even and >= 4");
  if (!(dt_s > 0.0)) throw Error("impulse: time step must be positive");

  const double df = 1.0 / (static_cast<double>(n) * dt_s);
  const std::size_t half = n / 2;
  const double f_nyquist = static_cast<double>(half) * df;
  const double f_first = freqs_hz.front();
  const double f_max = freqs_hz.back();
  const bool full_band = f_max >= f_nyquist * (1.0 - 1e-9);

  const double lever = f_first / (freqs_hz[1] - f_first);
  cplx dc;
  if (options.dc == DcExtrapolation::RealPart) {
    dc = response[0].real() - lever * (response[1].real() - response[0].real());
  } else {
    // A pure delay has constant magnitude and linear phase, so this is exact for it.
    const double mag = std::max(0.0, std::abs(response[0]) - lever * (std::abs(response[1]) - std::abs(response[0])));
    const double step = response[0] == 0.0 ? 0.0 : std::arg(response[1] / response[0]);
    const double phase = std::arg(response[0]) - lever * step;
    dc = std::cos(phase) < 0.0 ? -mag : mag;
  }

  const double taper_start = f_max * (1.0 - options.taper_fraction);
  std::vector<cplx> bins(half + 1, cplx(0.0));
  std::size_t j = 0;
  for (std::size_t k = 0; k <= half; ++k) {
    const double f = static_cast<double>(k) * df;
    if (f > f_max * (1.0 + 1e-12)) break;
    cplx h;
    if (f <= f_first) {
      const double t = f_first > 0.0 ? f / f_first : 1.0;
      h = (1.0 - t) * dc + t * response[0];
    } else {
      while (j + 1 < freqs_hz.size() && freqs_hz[j + 1] < f) ++j;
      if (j + 1 >= freqs_hz.size()) {
        h = response.back();
      } else {
        const double t = (f - freqs_hz[j]) / (freqs_hz[j + 1] - freqs_hz[j]);
        h = (1.0 - t) * response[j] + t * response[j + 1];
      }
    }
    if (!full_band && options.taper_fraction > 0.0 && f > taper_start) {
      const double x = std::min(1.0, (f - taper_start) / (f_max - taper_start));
      h *= 0.5 * (1.0 + std::cos(std::numbers::pi * x));
    }
    bins[k] = h;
  }
  bins[0] = cplx(bins[0].real(), 0.0);
  bins[half] = cplx(bins[half].real(), 0.0);

  ImpulseResponse ir;
  ir.dt_s = dt_s;
  ir.samples = inverse_real_dft(bins, n);
  ir.tapered = !full_band;
  ir.negative_count = static_cast<std::size_t>(std::floor(options.negative_time_fraction * static_cast<double>(n)));
  double total = 0.0, negative = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ir.samples[i] * ir.samples[i];
    total += e;
    if (i >= n - ir.negative_count) negative += e;
  }
  ir.acausal_energy_fraction = total > 0.0 ? negative / total : 0.0;
  return ir;
}

}  // namespace sivar
