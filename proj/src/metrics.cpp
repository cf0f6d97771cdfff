#include "sivar/metrics.hpp"

#include "sivar/dataset.hpp"
#include "sivar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sivar {

namespace {

constexpr double kInchToMeter = 0.0254;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double magnitude_db(cplx v) {
  const double mag = std::abs(v);
  if (mag == 0.0) return kDbFloor;
  return std::max(kDbFloor, 20.0 * std::log10(mag));
}

}  // namespace

std::size_t snap_to_grid(std::span<const double> freqs_hz, double f_hz) {
  if (freqs_hz.size() < 2) throw Error("frequency grid needs at least 2 points");
  auto it = std::lower_bound(freqs_hz.begin(), freqs_hz.end(), f_hz);
  std::size_t i;
  if (it == freqs_hz.end()) {
    i = freqs_hz.size() - 1;
  } else if (it == freqs_hz.begin()) {
    i = 0;
  } else {
    const auto hi = static_cast<std::size_t>(it - freqs_hz.begin());
    i = (f_hz - freqs_hz[hi - 1] <= freqs_hz[hi] - f_hz) ? hi - 1 : hi;
  }
  double step;
  if (f_hz >= freqs_hz[i])
    step = i + 1 < freqs_hz.size() ? freqs_hz[i + 1] - freqs_hz[i] : freqs_hz[i] - freqs_hz[i - 1];
  else
    step = i > 0 ? freqs_hz[i] - freqs_hz[i - 1] : freqs_hz[1] - freqs_hz[0];
  if (std::abs(f_hz - freqs_hz[i]) > 0.5 * step * (1.0 + 1e-9))
    throw Error("sample frequency " + std::to_string(f_hz) + " Hz is not within half a grid step of the measured grid");
  return i;
}

std::vector<double> unwrap_phase(std::span<const cplx> series) {
  std::vector<double> out(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (series[k] == cplx(0.0)) throw NumericError(k, "unwrap_phase: zero magnitude");
    if (k == 0) {
      double p = std::arg(series[0]) * kRadToDeg;
      if (p <= -180.0) p += 360.0;
      out[0] = p;
    } else {
      // Increment is the principal angle of z_k / z_{k-1}.
      double d = std::arg(series[k] * std::conj(series[k - 1])) * kRadToDeg;
      if (d <= -180.0) d += 360.0;
      out[k] = out[k - 1] + d;
    }
  }
  return out;
}

double flight_time(std::span<const double> freqs_hz, std::span<const cplx> through, double f_sample_hz) {
  if (freqs_hz.size() != through.size()) throw Error("flight_time: grid and series sizes differ");
  const std::size_t i = snap_to_grid(freqs_hz, f_sample_hz);
  const std::vector<double> phase = unwrap_phase(through.first(i + 1));
  return -phase[i] / (360.0 * freqs_hz[i]);
}

double propagation_velocity(const NetworkData& net, double mean_length_in, double f_sample_hz) {
  const double tp = flight_time(net.freqs_hz, net.logical_series(2, 1), f_sample_hz);
  const double tn = flight_time(net.freqs_hz, net.logical_series(4, 3), f_sample_hz);
  const double t = 0.5 * (tp + tn);
  if (!(t > 0.0) || !(mean_length_in > 0.0)) throw Error("propagation velocity: non-positive flight time or length");
  return mean_length_in * kInchToMeter / t;
}

double total_skew(const NetworkData& net, double f_sample_hz) {
  const double tp = flight_time(net.freqs_hz, net.logical_series(2, 1), f_sample_hz);
  const double tn = flight_time(net.freqs_hz, net.logical_series(4, 3), f_sample_hz);
  return tp - tn;
}

double random_skew_ps(const NetworkData& net, const NetRecord& rec, double v_ref_m_per_s, double f_sample_hz) {
  if (!rec.len_p_in || !rec.len_n_in) throw Error("metadata incomplete: P/N lengths required for skew");
  if (!(v_ref_m_per_s > 0.0)) throw Error("random skew: reference velocity must be positive");
  const double designed_in = (*rec.len_p_in - *rec.len_n_in) * kInchToMeter / v_ref_m_per_s;
  return (total_skew(net, f_sample_hz) - designed_in) * 1e12;
}

double loss_per_inch(const MixedModeNetwork& mm, const NetRecord& rec, double f_sample_hz) {
  const double len = rec.mean_length_in();
  if (!(len > 0.0)) throw Error("loss per inch: mean net length must be positive");
  const std::size_t i = snap_to_grid(mm.freqs_hz, f_sample_hz);
  const double mag = std::abs(mm.sdd[i](1, 0));
  if (mag == 0.0) throw NumericError(i, "no through path (|SDD21| = 0)");
  return -20.0 * std::log10(mag) / len;
}

double scd21_db(const MixedModeNetwork& mm, double f_sample_hz) {
  const std::size_t i = snap_to_grid(mm.freqs_hz, f_sample_hz);
  return magnitude_db(mm.scd[i](1, 0));
}

std::optional<double> sdd11_crossing(const MixedModeNetwork& mm, double threshold_db) {
  double prev_db = 0.0;
  for (std::size_t k = 0; k < mm.size(); ++k) {
    const double db = magnitude_db(mm.sdd[k](0, 0));
    if (db > threshold_db) {
      if (k == 0) return mm.freqs_hz[0];
      const double t = (threshold_db - prev_db) / (db - prev_db);
      return mm.freqs_hz[k - 1] + t * (mm.freqs_hz[k] - mm.freqs_hz[k - 1]);
    }
    prev_db = db;
  }
  return std::nullopt;
}

OutcomeRow frequency_outcomes(const NetworkData& net, const MixedModeNetwork& mm, const NetRecord& rec,
                              double v_ref_m_per_s, const OutcomeConfig& config) {
  OutcomeRow row;
  row.net_id = rec.board_serial + "/" + rec.net_name;
  for (double f : config.skew_freqs_hz) row.random_skew_ps.push_back(random_skew_ps(net, rec, v_ref_m_per_s, f));
  for (double f : config.loss_freqs_hz) row.loss_db_per_in.push_back(loss_per_inch(mm, rec, f));
  for (double f : config.scd21_freqs_hz) row.scd21_db.push_back(scd21_db(mm, f));
  row.f_sdd11_minus10db_hz = sdd11_crossing(mm, config.sdd11_threshold_db);
  return row;
}

}  // namespace sivar
