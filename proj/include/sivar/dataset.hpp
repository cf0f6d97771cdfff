#pragma once

#include "sivar/metrics.hpp"
#include "sivar/sparams.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sivar {

/// Per-net metadata from the manifest. Lengths are in inches.
struct NetRecord {
  std::string net_name;
  std::string board_serial;
  int routing_core = 0;
  std::optional<double> len_p_in;
  std::optional<double> len_n_in;
  std::string tester_id;
  std::string s4p_path;  // as written in the manifest (relative to it, usually)
  PortMap port_map;

  double mean_length_in() const;
};

inline const std::vector<std::string>& manifest_columns() {
  static const std::vector<std::string> cols{"net_name", "board_serial", "routing_core", "len_p_in",
                                             "len_n_in", "tester_id",    "s4p_path"};
  return cols;
}

struct Manifest {
  std::vector<NetRecord> records;
  std::filesystem::path base_dir;
  std::vector<std::string> warnings;

  std::filesystem::path resolve(const NetRecord& rec) const;
};

struct ManifestOptions {
  /// When set, routing_core values outside it are rejected.
  std::optional<std::set<int>> declared_cores;
  /// Report records whose s4p file does not exist (as warnings).
  bool check_files = true;
};

/// Parses manifest CSV text. Column order is free; names must match exactly.
/// An optional `port_map` column ("1-2-3-4") remaps file ports per row.
Manifest parse_manifest(std::string_view csv, const std::filesystem::path& base_dir,
                        const ManifestOptions& options = {});
Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});
std::string write_manifest(const std::vector<NetRecord>& records);

struct Column {
  std::string name;
  std::string unit;
};

/// One row per measured net: metadata, processing status, and outcome values.
struct OutcomeTable {
  struct Row {
    NetRecord record;
    std::string status = "ok";
    std::vector<std::optional<double>> values;  // aligned with columns
  };

  std::vector<Column> columns;
  std::vector<Row> rows;

  std::optional<std::size_t> column_index(std::string_view name) const;
  /// Throws on duplicate (net_name, board_serial), value-count mismatch, or a column without a unit.
  void validate() const;
  /// Sorts rows by (board_serial, net_name).
  void sort_canonical();
  /// Values of one column (missing entries skipped), paired with their row indices.
  std::vector<std::pair<std::size_t, double>> column_values(std::string_view name) const;
};

/// Figure-1 style labels for the configured outcome columns.
std::vector<Column> outcome_columns(const OutcomeConfig& config);
std::vector<std::optional<double>> outcome_values(const OutcomeRow& row, const OutcomeConfig& config);

/// Frequency label as used in column names, e.g. "1 GHz".
std::string ghz_label(double f_hz);

namespace column {
std::string random_skew(double f_hz);
std::string loss_per_inch(double f_hz);
std::string scd21(double f_hz);
inline const std::string kSdd11Crossing = "Freq, SDD11 @ -10 dB";
inline const std::string kImpedance = "Impedance (\xCE\xA9)";
inline const std::string kEyeHeight = "Eye Height (volts)";
inline const std::string kEyeWidth = "Eye Width (UI)";
inline const std::string kEyeJitter = "Eye Jitter (UI)";
inline const std::string kEyeNoise = "Vertical Eye Noise (volts)";
}  // namespace column

/// Per-net value lists across boards.
struct NetGroups {
  std::vector<std::string> net_names;
  std::vector<std::vector<double>> values;  // board order follows board_serial sort
};

/// Groups a column's values by net_name. Rows with missing values are skipped.
NetGroups same_net_grouping(const OutcomeTable& table, std::string_view column);

/// Generic result table (statistics reports).
using Cell = std::variant<std::monostate, double, std::string>;
struct ResultTable {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

enum class ExportFormat { Csv, Json };

/// Byte-stable serializations: 10 significant digits, sorted JSON keys.
std::string outcome_table_csv(const OutcomeTable& table);
std::string outcome_table_json(const OutcomeTable& table);
std::string result_table_csv(const ResultTable& table);
std::string result_table_json(const ResultTable& table);

void export_table(const OutcomeTable& table, ExportFormat format, const std::filesystem::path& path);
void export_table(const ResultTable& table, ExportFormat format, const std::filesystem::path& path);

/// Reads back an outcome-table CSV written by outcome_table_csv.
OutcomeTable import_outcome_table_csv(std::string_view csv);
OutcomeTable load_outcome_table(const std::filesystem::path& path);

}  // namespace sivar
