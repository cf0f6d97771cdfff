#pragma once

#include "sivar/spectral.hpp"
#include "sivar/sparams.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sivar {

/// Driver response to one isolated 1-bit, starting and ending at the 0-level.
struct DriverWaveform {
  double dt_s = 0.0;
  double bit_period_s = 0.0;
  std::vector<double> samples_v;

  std::size_t samples_per_ui() const;
  /// dt must divide the UI (1e-12 relative) and the tail must be within 1 mV of zero.
  void validate() const;

  /// Linear-edge pulse: ramp(t) - ramp(t - UI), so back-to-back ones sum to exactly `swing_v`.
  static DriverWaveform trapezoid(double bit_period_s, std::size_t samples_per_ui, double swing_v, double edge_s);

  /// CSV with a `# ui=<seconds>` line, optional `time_s,volts` header, then rows.
  static DriverWaveform parse_csv(std::string_view text);
  static DriverWaveform load_csv(const std::filesystem::path& path);
  std::string to_csv() const;
};

/// Maximal-length PRBS bit sequence of the given order (7, 9, 11, 15, 23, 31), all-ones seed.
std::vector<std::uint8_t> prbs(int order);

/// Folded eye. Traces are 2 UI + 1 sample long, centred on column `samples_per_ui`.
struct EyeDiagram {
  double ui_s = 0.0;
  double dt_s = 0.0;
  std::size_t samples_per_ui = 0;
  double threshold_v = 0.0;
  std::vector<std::vector<double>> traces;
  /// +1 if the trace's centre sample belongs to the upper rail, -1 for the lower one.
  /// Empty means "classify by threshold".
  std::vector<int> rails;
  /// One period of the steady-state far-end waveform and the fold origin within it.
  std::vector<double> waveform_v;
  std::size_t window_start = 0;

  std::size_t trace_count() const { return traces.size(); }
  std::size_t center_column() const { return samples_per_ui; }
};

struct EyeMetrics {
  double eye_height_v = 0.0;
  double eye_width_ui = 0.0;
  double jitter_ui = 0.0;
  double vertical_eye_noise_v = 0.0;
};

struct LinkOptions {
  SpectrumOptions spectrum;
};

/// Real impulse response of a through path at the driver's time step.
/// Throws if the grid has fewer than 8 points per 1/UI; warns when it stops below 2/UI.
ImpulseResponse impulse_response(std::span<const double> freqs_hz, std::span<const cplx> sdd21, double dt_s,
                                 double ui_s, const SpectrumOptions& options = {},
                                 std::vector<std::string>* warnings = nullptr);

/// Far-end single-bit response: channel impulse convolved with the driver pulse.
/// Index i is time (i - lead) * dt where `lead` is the impulse's negative-time length.
struct PulseResponse {
  double dt_s = 0.0;
  std::size_t lead = 0;
  std::vector<double> v;
};
PulseResponse pulse_response(const ImpulseResponse& ir, const DriverWaveform& driver);

/// Steady-state response to the periodically repeated pattern, superposed from
/// shifted single-bit responses and folded into a 2-UI eye.
EyeDiagram synthesize_eye(const DiffBlock& channel, const DriverWaveform& driver, std::span<const std::uint8_t> pattern,
                          const LinkOptions& options = {});

/// Same, from a precomputed pulse response.
EyeDiagram fold_eye(const PulseResponse& pulse, const DriverWaveform& driver, std::span<const std::uint8_t> pattern);

/// Height, width, jitter and vertical noise measured at the centre column and mid threshold.
/// Throws "eye collapsed" when no trace crosses the threshold.
EyeMetrics extract_metrics(const EyeDiagram& eye);

struct LinkComponents {
  std::vector<DiffBlock> before;  // between driver and board, in signal order
  std::vector<DiffBlock> after;   // between board and receiver
};

/// Cascades fixed components around the board's differential block, then simulates the eye.
EyeMetrics simulate_link(const MixedModeNetwork& pwb, const LinkComponents& fixed, const DriverWaveform& driver,
                         std::span<const std::uint8_t> pattern, const LinkOptions& options = {});

/// Trace matrix: header row of times in UI, then one row per trace.
std::string eye_csv(const EyeDiagram& eye);

}  // namespace sivar
