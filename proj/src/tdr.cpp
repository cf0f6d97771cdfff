#include "sivar/tdr.hpp"

#include "sivar/error.hpp"
#include "sivar/spectral.hpp"
#include "sivar/textio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace sivar {

TdrTrace step_response(std::span<const double> freqs_hz, std::span<const cplx> sdd11, double z_ref_diff_ohm,
                       const TdrOptions& options) {
  if (freqs_hz.size() != sdd11.size()) throw Error("step_response: grid and series sizes differ");
  bool uniform = true;
  const double df = mean_step(freqs_hz, &uniform);

  TdrTrace trace;
  trace.z_ref_diff_ohm = z_ref_diff_ohm;
  if (!uniform) trace.warnings.push_back("non-uniform frequency grid resampled by linear interpolation");
  if (freqs_hz.front() > 50e6) trace.warnings.push_back("grid starts above 50 MHz; DC extrapolation is coarse");

  auto n = std::bit_ceil(static_cast<std::size_t>(std::ceil(1.0 / (df * options.max_time_step_s))));
  n = std::max<std::size_t>(n, 16);
  const double dt = 1.0 / (static_cast<double>(n) * df);
  while (static_cast<double>(n / 2) * dt < options.min_span_s) n *= 2;

  SpectrumOptions spec;
  spec.dc = DcExtrapolation::RealPart;
  spec.taper_fraction = options.taper_fraction;
  const ImpulseResponse ir = impulse_on_uniform_grid(freqs_hz, sdd11, n, dt, spec);

  const std::size_t half = n / 2;
  const auto lead = std::min(half, static_cast<std::size_t>(std::llround(options.lead_s / dt)));
  double acc = 0.0;
  for (std::size_t i = n - lead; i < n; ++i) acc += ir.samples[i];
  trace.time_s.resize(half);
  trace.rho.resize(half);
  trace.z_ohm.resize(half);
  for (std::size_t i = 0; i < half; ++i) {
    acc += ir.samples[i];
    trace.time_s[i] = static_cast<double>(i) * dt;
    trace.rho[i] = acc;
    const double r = std::min(acc, 1.0 - 1e-12);
    trace.z_ohm[i] = z_ref_diff_ohm * (1.0 + r) / (1.0 - r);
  }
  return trace;
}

TdrTrace step_response(const MixedModeNetwork& mm, const TdrOptions& options) {
  const auto s11 = mm.sdd11();
  return step_response(mm.freqs_hz, s11, mm.z_ref_diff_ohm, options);
}

double settle_time(const TdrTrace& trace, const SettleOptions& options) {
  const double dt = trace.dt();
  if (trace.time_s.size() < 3 || !(dt > 0.0)) throw Error("settle_time: trace too short");
  const auto hold = static_cast<std::size_t>(std::ceil(options.hold_s / dt - 1e-9));
  const double limit = options.slope_limit_ohm_per_ns * 1e9 * dt;  // per-sample step limit
  std::size_t quiet_since = 0;
  for (std::size_t i = 0; i + 1 < trace.z_ohm.size(); ++i) {
    if (std::abs(trace.z_ohm[i + 1] - trace.z_ohm[i]) >= limit) {
      quiet_since = i + 1;
    } else if (i + 1 - quiet_since >= hold) {
      return trace.time_s[quiet_since];
    }
  }
  throw Error("settle_time: impedance never settles");
}

ImpedanceResult windowed_impedance(const TdrTrace& trace, std::optional<double> t_start_s, double window_s,
                                   const SettleOptions& settle) {
  if (trace.time_s.empty()) throw Error("windowed_impedance: empty trace");
  const double start = t_start_s ? *t_start_s : settle_time(trace, settle);
  const double stop = start + window_s;
  if (start < trace.time_s.front() || stop > trace.time_s.back())
    throw Error("windowed_impedance: window exceeds trace span");
  const double dt = trace.dt();
  const auto first = static_cast<std::size_t>(std::ceil((start - trace.time_s.front()) / dt - 1e-9));
  const auto last = static_cast<std::size_t>(std::floor((stop - trace.time_s.front()) / dt + 1e-9));
  double sum = 0.0;
  for (std::size_t i = first; i <= last; ++i) sum += trace.z_ohm[i];
  ImpedanceResult r;
  r.odd_ohm = 0.5 * sum / static_cast<double>(last - first + 1);
  r.t_start_s = start;
  r.t_stop_s = stop;
  return r;
}

std::string tdr_csv(const TdrTrace& trace) {
  std::string out = "time_s,rho,z_ohm\n";
  for (std::size_t i = 0; i < trace.time_s.size(); ++i) {
    out += textio::format_number(trace.time_s[i]) + "," + textio::format_number(trace.rho[i]) + "," +
           textio::format_number(trace.z_ohm[i]) + "\n";
  }
  return out;
}

}  // namespace sivar
