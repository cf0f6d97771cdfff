#pragma once

#include "sivar/sparams.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sivar {

/// Differential TDR waveform: reflection step response and impedance profile.
struct TdrTrace {
  std::vector<double> time_s;  // uniform, starts at 0
  std::vector<double> rho;
  std::vector<double> z_ohm;   // differential impedance
  double z_ref_diff_ohm = 100.0;
  std::vector<std::string> warnings;

  double dt() const { return time_s.size() > 1 ? time_s[1] - time_s[0] : 0.0; }
};

struct TdrOptions {
  double max_time_step_s = 10e-12;
  double min_span_s = 10e-9;
  double taper_fraction = 0.1;
  /// The running sum starts this long before t = 0. Starting at half a period
  /// would integrate the DC-extrapolation error into a ramp.
  double lead_s = 2e-9;
};

/// Step response of SDD11 by DC extrapolation, conjugate-symmetric extension,
/// band-edge taper, inverse transform and running sum from shortly before t = 0.
TdrTrace step_response(std::span<const double> freqs_hz, std::span<const cplx> sdd11,
                       double z_ref_diff_ohm = 100.0, const TdrOptions& options = {});
TdrTrace step_response(const MixedModeNetwork& mm, const TdrOptions& options = {});

struct SettleOptions {
  double slope_limit_ohm_per_ns = 5.0;
  double hold_s = 100e-12;
};

/// First time after which |dZ/dt| stays below the limit for the hold time.
double settle_time(const TdrTrace& trace, const SettleOptions& options = {});

struct ImpedanceResult {
  double odd_ohm = 0.0;
  double t_start_s = 0.0;
  double t_stop_s = 0.0;
};

/// Mean differential impedance over [t_start, t_start + window], halved to odd mode.
/// Without an explicit start, the settle time is used.
ImpedanceResult windowed_impedance(const TdrTrace& trace, std::optional<double> t_start_s = std::nullopt,
                                   double window_s = 2e-9, const SettleOptions& settle = {});

/// CSV with columns time_s, rho, z_ohm.
std::string tdr_csv(const TdrTrace& trace);

}  // namespace sivar
