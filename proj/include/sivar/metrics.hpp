#pragma once

#include "sivar/sparams.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sivar {

struct NetRecord;

/// Index of the grid point nearest `f_hz`. Throws if the nearest point is more
/// than half a local grid step away (or outside the grid by more than that).
std::size_t snap_to_grid(std::span<const double> freqs_hz, double f_hz);

/// Continuous phase in degrees, first sample in (-180, 180].
/// Throws NumericError at the first zero-magnitude sample.
std::vector<double> unwrap_phase(std::span<const cplx> series);

/// Phase delay -phi(f)/(360 f) of a through path at the grid point nearest f_sample_hz.
double flight_time(std::span<const double> freqs_hz, std::span<const cplx> through, double f_sample_hz);

/// Propagation velocity in m/s from a net's mean length and its mean P/N flight time.
double propagation_velocity(const NetworkData& net, double mean_length_in, double f_sample_hz);

/// Total skew (P minus N flight time) in seconds.
double total_skew(const NetworkData& net, double f_sample_hz);

/// Random skew in picoseconds: total skew minus the length-mismatch skew
/// (len_p - len_n) / v_ref. Sign is preserved.
double random_skew_ps(const NetworkData& net, const NetRecord& rec, double v_ref_m_per_s, double f_sample_hz);

/// Differential insertion loss per inch, -20 log10|SDD21| / mean(len_p, len_n).
double loss_per_inch(const MixedModeNetwork& mm, const NetRecord& rec, double f_sample_hz);

inline constexpr double kDbFloor = -200.0;

/// 20 log10|SCD21| with exact zero mapped to kDbFloor.
double scd21_db(const MixedModeNetwork& mm, double f_sample_hz);

/// Lowest frequency where 20 log10|SDD11| rises above the threshold,
/// linearly interpolated in dB between grid points; nullopt if never crossed.
/// If the first grid point is already above the threshold it is returned.
std::optional<double> sdd11_crossing(const MixedModeNetwork& mm, double threshold_db = -10.0);

/// Scalar outcomes of one net.
struct OutcomeRow {
  std::string net_id;
  std::vector<double> random_skew_ps;   // aligned with OutcomeConfig::skew_freqs_hz
  std::vector<double> loss_db_per_in;   // aligned with OutcomeConfig::loss_freqs_hz
  std::vector<double> scd21_db;         // aligned with OutcomeConfig::scd21_freqs_hz
  std::optional<double> f_sdd11_minus10db_hz;
  std::optional<double> impedance_odd_ohm;
  std::optional<double> eye_height_v;
  std::optional<double> eye_width_ui;
  std::optional<double> eye_jitter_ui;
  std::optional<double> vertical_eye_noise_v;
};

struct OutcomeConfig {
  std::vector<double> skew_freqs_hz{1e9, 2e9, 4e9};
  std::vector<double> loss_freqs_hz{1e9, 2e9, 4e9};
  std::vector<double> scd21_freqs_hz{1e9, 2e9, 3e9};
  double sdd11_threshold_db = -10.0;
};

/// Skew, loss, SCD21 and SDD11-crossing outcomes. Impedance and eye fields are left empty.
OutcomeRow frequency_outcomes(const NetworkData& net, const MixedModeNetwork& mm, const NetRecord& rec,
                              double v_ref_m_per_s, const OutcomeConfig& config);

}  // namespace sivar
