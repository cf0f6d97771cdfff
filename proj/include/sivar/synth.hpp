#pragma once

#include "sivar/dataset.hpp"
#include "sivar/sparams.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sivar {

/// Standard deviations of the three variation levels.
struct EffectSigmas {
  double board = 0.0;
  double core = 0.0;
  double net = 0.0;  // drawn per (board, net)
};

struct PopulationSpec {
  int boards = 6;
  std::vector<std::string> serials;  // empty: SN01, SN02, ...
  int cores = 8;
  int nets_per_board = 2000;
  double length_min_in = 1.7;
  double length_max_in = 32.8;
  double er = 3.4;

  double z_odd_ohm = 52.4;
  double k_skin_db_per_in = 0.09;        // times sqrt(f / GHz)
  double k_dielectric_db_per_in = 0.06;  // times f / GHz
  double via_c_pf = 0.15;

  EffectSigmas z_sigma_ohm{0.6, 0.8, 1.0};
  EffectSigmas loss_sigma_rel{0.05, 0.08, 0.05};  // relative to the nominal loss
  EffectSigmas skew_sigma_ps{4.0, 10.0, 6.0};
  double skew_mean_ps = 3.7;
  double skew_per_inch_ps = 0.0;
  double designed_skew_min_ps = 0.0;
  double designed_skew_max_ps = 8.0;
  /// Per-net frequency-flat P/N transmission imbalance (relative amplitude).
  double pn_imbalance_sigma = 0.04;

  double f_start_hz = 10e6;
  double f_step_hz = 10e6;
  int f_points = 600;

  std::uint64_t seed = 1;

  /// Throws naming the first invalid field.
  void validate() const;
  std::vector<double> grid() const;
  std::string serial(int board) const;
  /// Delay per inch in seconds for the nominal dielectric.
  double time_per_inch_s() const;
};

/// Parameters of one physical net on one board.
struct NetTruth {
  std::string net_name;
  std::string board_serial;
  int routing_core = 0;
  double len_p_in = 0.0;
  double len_n_in = 0.0;
  double z_odd_ohm = 0.0;
  double tau_p_s = 0.0;
  double tau_n_s = 0.0;
  double loss_scale = 1.0;   // multiplies the nominal loss coefficients
  double flat_loss_p_np = 0.0;
  double flat_loss_n_np = 0.0;
  double designed_skew_ps = 0.0;
  double random_skew_ps = 0.0;  // tau_p - tau_n - designed-in skew
};

/// Inputs of the two-line model.
struct LineParams {
  double z_ohm = 50.0;
  double tau_s = 0.0;
  double length_in = 0.0;
  double k_skin_db_per_in = 0.0;
  double k_dielectric_db_per_in = 0.0;
  double flat_loss_np = 0.0;
};

struct NetModelParams {
  LineParams p, n;
  double via_c_f = 0.0;
  double z_ref_ohm = 50.0;
};

/// Two uncoupled lines, each framed by shunt-C vias, as a 4-port (P = ports 1,2; N = ports 3,4).
NetworkData net_model(const NetModelParams& params, const std::vector<double>& freqs_hz);

struct GroundTruth {
  PopulationSpec spec;
  std::vector<double> board_z, board_loss, board_skew_ps;
  std::vector<double> core_z, core_loss, core_skew_ps;  // index core - 1
  std::vector<NetTruth> nets;  // board-major
};

/// Population with lazily built networks.
class Population {
 public:
  explicit Population(const PopulationSpec& spec);

  const GroundTruth& truth() const { return truth_; }
  const std::vector<double>& grid() const { return grid_; }
  std::size_t size() const { return truth_.nets.size(); }

  NetworkData network(std::size_t i) const;
  NetModelParams model_params(std::size_t i) const;
  NetRecord record(std::size_t i) const;
  /// Relative path of net i's Touchstone file within the output directory.
  std::string s4p_path(std::size_t i) const;

 private:
  GroundTruth truth_;
  std::vector<double> grid_;
};

PopulationSpec parse_population_spec(std::string_view json_text);
PopulationSpec load_population_spec(const std::filesystem::path& path);
std::string population_spec_json(const PopulationSpec& spec);
std::string ground_truth_json(const GroundTruth& truth);

struct SynthSummary {
  std::size_t nets = 0;
  std::size_t files = 0;
};

/// Writes every .s4p, manifest.csv and ground_truth.json under `out_dir`.
SynthSummary write_population(const Population& pop, const std::filesystem::path& out_dir, unsigned threads);

}  // namespace sivar
