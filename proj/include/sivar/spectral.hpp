#pragma once

#include "sivar/sparams.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace sivar {

/// Real time series produced from a one-sided frequency response.
///
/// `samples` is in DFT order: index n < size() - negative_count is time n*dt,
/// the trailing `negative_count` samples are the wrapped negative times.
struct ImpulseResponse {
  double dt_s = 0.0;
  std::vector<double> samples;
  std::size_t negative_count = 0;
  /// True when the measured band stopped short of Nyquist and a taper was applied.
  bool tapered = false;
  /// Energy in the negative-time tail divided by total energy.
  double acausal_energy_fraction = 0.0;

  std::size_t size() const { return samples.size(); }
  double time_of(std::size_t n) const;
  /// Signed sample offset of index n (negative for the wrapped tail).
  long long offset_of(std::size_t n) const;
};

/// How the DC value is extrapolated from the first two measured points.
enum class DcExtrapolation {
  RealPart,        // real part linear to DC
  MagnitudePhase,  // magnitude linear to DC, sign from the linearly extrapolated phase
};

struct SpectrumOptions {
  DcExtrapolation dc = DcExtrapolation::MagnitudePhase;
  /// Raised-cosine roll-off width as a fraction of the measured band.
  double taper_fraction = 0.1;
  /// Share of the period treated as negative time.
  double negative_time_fraction = 0.1;
};

/// Mean spacing of the grid; returns false in `uniform` if any step deviates by more than 1e-6 relative.
double mean_step(std::span<const double> freqs_hz, bool* uniform = nullptr);

/// Builds a length-n real impulse response sampled at dt from H(f) on an arbitrary ascending grid.
///
/// H is linearly resampled onto k/(n*dt). Below the first measured point H is
/// interpolated between the extrapolated DC value and the first sample, so the
/// imaginary part falls proportionally to f. When the measured band ends below 1/(2*dt) the top
/// `taper_fraction` of the band is rolled off with a raised cosine and the rest
/// is zero; otherwise the whole DFT band is measured and no taper is applied.
ImpulseResponse impulse_on_uniform_grid(std::span<const double> freqs_hz, std::span<const cplx> response,
                                        std::size_t n, double dt_s, const SpectrumOptions& options = {});

/// Inverse real DFT of bins 0..n/2 (normalized by 1/n). Thread-safe.
std::vector<double> inverse_real_dft(std::span<const cplx> half_spectrum, std::size_t n);

/// Forward real DFT returning bins 0..n/2. Thread-safe.
std::vector<cplx> forward_real_dft(std::span<const double> samples);

}  // namespace sivar
