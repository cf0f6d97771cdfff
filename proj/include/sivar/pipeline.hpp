#pragma once

#include "sivar/dataset.hpp"
#include "sivar/linksim.hpp"
#include "sivar/stats.hpp"
#include "sivar/tdr.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sivar {

struct DriverOptions {
  double rate_gbps = 2.5;
  std::size_t samples_per_ui = 32;
  double swing_v = 1.2;
  double edge_s = 40e-12;
  std::optional<std::filesystem::path> file;  // overrides the trapezoid

  DriverWaveform make() const;
};

struct AnalyzeOptions {
  OutcomeConfig outcomes;
  DriverOptions driver;
  int prbs_order = 7;
  /// Fixed link components given as 4-port files; their differential blocks are used.
  std::vector<std::filesystem::path> fixed_before;
  std::vector<std::filesystem::path> fixed_after;
  bool impedance = true;
  bool eye = true;
  unsigned threads = 0;
  double z_ref_ohm = 50.0;
};

struct AnalyzeResult {
  OutcomeTable table;
  std::size_t failed = 0;
  double v_ref_m_per_s = 0.0;
  std::string v_ref_net;
  std::vector<std::string> log;

  double failure_fraction() const;
};

/// Everything computed for one net; throws on the first failing step.
OutcomeRow analyze_network(const NetworkData& net, const NetRecord& rec, double v_ref_m_per_s,
                           const AnalyzeOptions& options, const LinkComponents& fixed, const DriverWaveform& driver,
                           const std::vector<std::uint8_t>& pattern);

/// Per-net reduction of a manifest. Failing nets are kept with an error status.
AnalyzeResult analyze(const Manifest& manifest, const AnalyzeOptions& options);

/// outcomes.csv, outcomes.json and analyze.log.
void write_analysis(const AnalyzeResult& result, const std::filesystem::path& out_dir);

/// Tester repeatability sigma per outcome column, read from a JSON object.
std::map<std::string, double> parse_tester_sigma(std::string_view json_text);

struct ReportOptions {
  double sigma_k = 5.0;
  std::map<std::string, double> tester_sigma;
};

ResultTable global_summary_table(const OutcomeTable& table, const ReportOptions& options);
ResultTable snv_table(const OutcomeTable& table, const ReportOptions& options);
ResultTable anova_table(const OutcomeTable& table);

inline const std::string kPredictorLength = "Net Length";
inline const std::string kPredictorCore = "Routing Core";
inline const std::string kPredictorSerial = "Serial Number";
inline const std::string kPredictorSkew = "Random Skew, (1 GHz)";

/// Writes the selected report tables (CSV + JSON) and, for the full report, plots.
enum class ReportKind { Full, Snv, Anova };
void write_report(const OutcomeTable& table, const ReportOptions& options, const std::filesystem::path& out_dir,
                  ReportKind kind = ReportKind::Full);

struct SampleSizeOptions {
  std::vector<std::size_t> sizes{10, 30, 100, 300, 1000, 2000};
  std::size_t trials = 500;
  std::uint64_t seed = 1;
};

ResultTable sample_size_table(const std::vector<SampleSizeRow>& rows);
void write_sample_size(const std::vector<SampleSizeRow>& rows, const std::filesystem::path& out_dir);

/// Single-net eye: cascade, fold, metrics; writes eye.csv and eye.svg.
EyeMetrics run_eye(const std::filesystem::path& s4p, const AnalyzeOptions& options, const std::filesystem::path& out_dir,
                   const PortMap& port_map = {});

}  // namespace sivar
