#include "sivar/dataset.hpp"

#include "sivar/error.hpp"
#include "sivar/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

namespace sivar {

namespace {

using json = nlohmann::json;

constexpr int kDigits = 10;

const std::vector<std::string>& outcome_meta_columns() {
  static const std::vector<std::string> cols{"net_name", "board_serial", "routing_core", "len_p_in",
                                             "len_n_in", "tester_id",    "s4p_path",     "status"};
  return cols;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string port_map_text(const PortMap& m) {
  return std::to_string(m.file_port[0]) + "-" + std::to_string(m.file_port[1]) + "-" +
         std::to_string(m.file_port[2]) + "-" + std::to_string(m.file_port[3]);
}

bool parse_port_map(std::string_view text, PortMap& out) {
  PortMap m;
  std::size_t pos = 0;
  for (int k = 0; k < 4; ++k) {
    const std::size_t dash = text.find('-', pos);
    const std::string_view tok = text.substr(pos, dash == std::string_view::npos ? std::string_view::npos : dash - pos);
    long long v = 0;
    if (!textio::parse_int(tok, v)) return false;
    m.file_port[static_cast<std::size_t>(k)] = static_cast<int>(v);
    if (k < 3) {
      if (dash == std::string_view::npos) return false;
      pos = dash + 1;
    } else if (dash != std::string_view::npos) {
      return false;
    }
  }
  if (!m.is_valid()) return false;
  out = m;
  return true;
}

std::string number_cell(std::optional<double> v) { return v ? textio::format_number(*v, kDigits) : std::string(); }

json number_json(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return textio::round_significant(*v, kDigits);
}

std::string header_cell(const Column& c) { return c.name + " [" + c.unit + "]"; }

}  // namespace

double NetRecord::mean_length_in() const {
  if (!len_p_in || !len_n_in) throw Error("metadata incomplete: P/N lengths required");
  return 0.5 * (*len_p_in + *len_n_in);
}

std::filesystem::path Manifest::resolve(const NetRecord& rec) const {
  const std::filesystem::path p(rec.s4p_path);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest parse_manifest(std::string_view csv, const std::filesystem::path& base_dir, const ManifestOptions& options) {
  Manifest m;
  m.base_dir = base_dir;
  const auto lines = split_lines(csv);
  std::size_t first = 0;
  while (first < lines.size() && textio::trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw ParseError(1, "manifest: missing header row");
  const auto header = textio::split_csv_line(lines[first]);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(textio::trim(header[i]));
    if (!col.emplace(name, i).second) throw ParseError(first + 1, "manifest: duplicate column '" + name + "'");
  }
  for (const auto& c : manifest_columns())
    if (!col.count(c)) throw ParseError(first + 1, "manifest: missing column '" + c + "'");
  const auto port_col = col.find("port_map");

  std::set<std::pair<std::string, std::string>> keys;
  std::size_t row_no = 0;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    if (textio::trim(lines[li]).empty()) continue;
    ++row_no;
    const std::size_t line_no = li + 1;
    const auto f = textio::split_csv_line(lines[li]);
    auto fail = [&](const std::string& field, const std::string& what) {
      throw ParseError(line_no, "manifest row " + std::to_string(row_no) + ", field '" + field + "': " + what);
    };
    if (f.size() != header.size())
      throw ParseError(line_no, "manifest row " + std::to_string(row_no) + ": expected " +
                                    std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    auto get = [&](const std::string& c) { return std::string(textio::trim(f[col.at(c)])); };

    NetRecord r;
    r.net_name = get("net_name");
    if (r.net_name.empty()) fail("net_name", "empty");
    r.board_serial = get("board_serial");
    if (r.board_serial.empty()) fail("board_serial", "empty");
    long long core = 0;
    if (!textio::parse_int(get("routing_core"), core)) fail("routing_core", "not an integer");
    r.routing_core = static_cast<int>(core);
    if (options.declared_cores && !options.declared_cores->count(r.routing_core))
      fail("routing_core", "value " + std::to_string(core) + " is not a declared core");
    for (const char* name : {"len_p_in", "len_n_in"}) {
      const std::string v = get(name);
      if (v.empty()) continue;
      double d = 0.0;
      if (!textio::parse_double(v, d)) fail(name, "unparseable length '" + v + "'");
      if (!(d > 0.0) || !std::isfinite(d)) fail(name, "length must be positive, got " + v);
      (std::string_view(name) == "len_p_in" ? r.len_p_in : r.len_n_in) = d;
    }
    r.tester_id = get("tester_id");
    r.s4p_path = get("s4p_path");
    if (r.s4p_path.empty()) fail("s4p_path", "empty");
    if (port_col != col.end()) {
      const std::string v(textio::trim(f[port_col->second]));
      if (!v.empty() && !parse_port_map(v, r.port_map)) fail("port_map", "expected a permutation like 1-2-3-4");
    }
    if (!keys.emplace(r.net_name, r.board_serial).second)
      fail("net_name", "duplicate key (" + r.net_name + ", " + r.board_serial + ")");
    m.records.push_back(std::move(r));
  }
  if (options.check_files) {
    for (const auto& r : m.records) {
      if (!std::filesystem::exists(m.resolve(r)))
        m.warnings.push_back("missing file for " + r.board_serial + "/" + r.net_name + ": " + r.s4p_path);
    }
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options) {
  try {
    return parse_manifest(textio::read_file(path), path.parent_path(), options);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

std::string write_manifest(const std::vector<NetRecord>& records) {
  const bool with_ports =
      std::any_of(records.begin(), records.end(), [](const NetRecord& r) { return !(r.port_map == PortMap{}); });
  std::vector<std::string> header = manifest_columns();
  if (with_ports) header.push_back("port_map");
  std::string out = textio::csv_join(header) + "\n";
  for (const auto& r : records) {
    std::vector<std::string> f{r.net_name,         r.board_serial,    std::to_string(r.routing_core),
                               number_cell(r.len_p_in), number_cell(r.len_n_in), r.tester_id,
                               r.s4p_path};
    if (with_ports) f.push_back(port_map_text(r.port_map));
    out += textio::csv_join(f) + "\n";
  }
  return out;
}

std::optional<std::size_t> OutcomeTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  return std::nullopt;
}

void OutcomeTable::validate() const {
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (c.unit.empty()) throw Error("outcome table: column '" + c.name + "' has no unit");
    if (!names.insert(c.name).second) throw Error("outcome table: duplicate column '" + c.name + "'");
  }
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows) {
    if (r.values.size() != columns.size())
      throw Error("outcome table: row " + r.record.board_serial + "/" + r.record.net_name + " has " +
                  std::to_string(r.values.size()) + " values for " + std::to_string(columns.size()) + " columns");
    if (!keys.emplace(r.record.net_name, r.record.board_serial).second)
      throw Error("outcome table: duplicate row " + r.record.board_serial + "/" + r.record.net_name);
  }
}

void OutcomeTable::sort_canonical() {
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.record.board_serial, a.record.net_name) < std::tie(b.record.board_serial, b.record.net_name);
  });
}

std::vector<std::pair<std::size_t, double>> OutcomeTable::column_values(std::string_view name) const {
  const auto idx = column_index(name);
  if (!idx) throw Error("outcome table: no column '" + std::string(name) + "'");
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (const auto& v = rows[i].values[*idx]; v) out.emplace_back(i, *v);
  return out;
}

std::string ghz_label(double f_hz) { return textio::format_number(f_hz * 1e-9, 6) + " GHz"; }

namespace column {
std::string random_skew(double f_hz) { return "Random Skew (ps): " + ghz_label(f_hz); }
std::string loss_per_inch(double f_hz) { return "SDD21 dB/In: " + ghz_label(f_hz); }
std::string scd21(double f_hz) { return "SCD21 (dB): " + ghz_label(f_hz); }
}  // namespace column

std::vector<Column> outcome_columns(const OutcomeConfig& config) {
  std::vector<Column> cols;
  for (double f : config.skew_freqs_hz) cols.push_back({column::random_skew(f), "ps"});
  cols.push_back({column::kEyeHeight, "V"});
  cols.push_back({column::kEyeWidth, "UI"});
  cols.push_back({column::kEyeJitter, "UI"});
  cols.push_back({column::kEyeNoise, "V"});
  for (double f : config.loss_freqs_hz) cols.push_back({column::loss_per_inch(f), "dB/in"});
  for (double f : config.scd21_freqs_hz) cols.push_back({column::scd21(f), "dB"});
  cols.push_back({column::kSdd11Crossing, "Hz"});
  cols.push_back({column::kImpedance, "ohm"});
  return cols;
}

std::vector<std::optional<double>> outcome_values(const OutcomeRow& row, const OutcomeConfig& config) {
  std::vector<std::optional<double>> v;
  auto aligned = [&](const std::vector<double>& vals, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) v.push_back(i < vals.size() ? std::optional<double>(vals[i]) : std::nullopt);
  };
  aligned(row.random_skew_ps, config.skew_freqs_hz.size());
  v.push_back(row.eye_height_v);
  v.push_back(row.eye_width_ui);
  v.push_back(row.eye_jitter_ui);
  v.push_back(row.vertical_eye_noise_v);
  aligned(row.loss_db_per_in, config.loss_freqs_hz.size());
  aligned(row.scd21_db, config.scd21_freqs_hz.size());
  v.push_back(row.f_sdd11_minus10db_hz);
  v.push_back(row.impedance_odd_ohm);
  return v;
}

NetGroups same_net_grouping(const OutcomeTable& table, std::string_view column) {
  const auto idx = table.column_index(column);
  if (!idx) throw Error("same_net_grouping: no column '" + std::string(column) + "'");
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_net;
  for (const auto& r : table.rows) {
    const auto& v = r.values[*idx];
    if (!v) continue;
    by_net[r.record.net_name].emplace_back(r.record.board_serial, *v);
  }
  NetGroups g;
  for (auto& [name, vals] : by_net) {
    std::sort(vals.begin(), vals.end());
    g.net_names.push_back(name);
    std::vector<double> x;
    x.reserve(vals.size());
    for (const auto& [serial, val] : vals) x.push_back(val);
    g.values.push_back(std::move(x));
  }
  return g;
}

std::string outcome_table_csv(const OutcomeTable& table) {
  table.validate();
  std::vector<std::string> header = outcome_meta_columns();
  for (const auto& c : table.columns) header.push_back(header_cell(c));
  std::string out = textio::csv_join(header) + "\n";
  for (const auto& r : table.rows) {
    const NetRecord& rec = r.record;
    std::vector<std::string> f{rec.net_name,         rec.board_serial,    std::to_string(rec.routing_core),
                               number_cell(rec.len_p_in), number_cell(rec.len_n_in), rec.tester_id,
                               rec.s4p_path,         r.status};
    for (const auto& v : r.values) f.push_back(number_cell(v));
    out += textio::csv_join(f) + "\n";
  }
  return out;
}

std::string outcome_table_json(const OutcomeTable& table) {
  table.validate();
  json cols = json::array();
  for (const auto& c : table.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}});
  json rows = json::array();
  for (const auto& r : table.rows) {
    json values = json::object();
    for (std::size_t i = 0; i < table.columns.size(); ++i) values[table.columns[i].name] = number_json(r.values[i]);
    rows.push_back({{"net_name", r.record.net_name},
                    {"board_serial", r.record.board_serial},
                    {"routing_core", r.record.routing_core},
                    {"len_p_in", number_json(r.record.len_p_in)},
                    {"len_n_in", number_json(r.record.len_n_in)},
                    {"tester_id", r.record.tester_id},
                    {"s4p_path", r.record.s4p_path},
                    {"status", r.status},
                    {"values", std::move(values)}});
  }
  json j{{"columns", std::move(cols)}, {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

std::string result_table_csv(const ResultTable& table) {
  std::string out = textio::csv_join(table.header) + "\n";
  for (const auto& row : table.rows) {
    std::vector<std::string> f;
    for (const auto& c : row) {
      if (const auto* d = std::get_if<double>(&c)) f.push_back(textio::format_number(*d, kDigits));
      else if (const auto* s = std::get_if<std::string>(&c)) f.push_back(*s);
      else f.emplace_back();
    }
    out += textio::csv_join(f) + "\n";
  }
  return out;
}

std::string result_table_json(const ResultTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw Error("result table '" + table.title + "': ragged row");
    json o = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto& c = row[i];
      if (const auto* d = std::get_if<double>(&c)) o[table.header[i]] = number_json(*d);
      else if (const auto* s = std::get_if<std::string>(&c)) o[table.header[i]] = *s;
      else o[table.header[i]] = nullptr;
    }
    rows.push_back(std::move(o));
  }
  json j{{"title", table.title}, {"header", table.header}, {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

void export_table(const OutcomeTable& table, ExportFormat format, const std::filesystem::path& path) {
  textio::write_file(path, format == ExportFormat::Csv ? outcome_table_csv(table) : outcome_table_json(table));
}

void export_table(const ResultTable& table, ExportFormat format, const std::filesystem::path& path) {
  textio::write_file(path, format == ExportFormat::Csv ? result_table_csv(table) : result_table_json(table));
}

OutcomeTable import_outcome_table_csv(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw ParseError(1, "outcome table: missing header row");
  const auto header = textio::split_csv_line(lines[0]);
  const auto& meta = outcome_meta_columns();
  if (header.size() < meta.size() || !std::equal(meta.begin(), meta.end(), header.begin()))
    throw ParseError(1, "outcome table: header does not start with the record columns");
  OutcomeTable t;
  for (std::size_t i = meta.size(); i < header.size(); ++i) {
    const std::string& h = header[i];
    const auto open = h.rfind(" [");
    if (open == std::string::npos || h.back() != ']') throw ParseError(1, "outcome table: column '" + h + "' has no unit");
    t.columns.push_back({h.substr(0, open), h.substr(open + 2, h.size() - open - 3)});
  }
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (textio::trim(lines[li]).empty()) continue;
    const auto f = textio::split_csv_line(lines[li]);
    if (f.size() != header.size()) throw ParseError(li + 1, "outcome table: wrong field count");
    OutcomeTable::Row r;
    r.record.net_name = f[0];
    r.record.board_serial = f[1];
    long long core = 0;
    if (!textio::parse_int(f[2], core)) throw ParseError(li + 1, "outcome table: invalid routing_core");
    r.record.routing_core = static_cast<int>(core);
    auto opt = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      double d = 0.0;
      if (!textio::parse_double(s, d)) throw ParseError(li + 1, "outcome table: invalid number '" + s + "'");
      return d;
    };
    r.record.len_p_in = opt(f[3]);
    r.record.len_n_in = opt(f[4]);
    r.record.tester_id = f[5];
    r.record.s4p_path = f[6];
    r.status = f[7];
    for (std::size_t i = meta.size(); i < f.size(); ++i) r.values.push_back(opt(f[i]));
    t.rows.push_back(std::move(r));
  }
  t.validate();
  return t;
}

OutcomeTable load_outcome_table(const std::filesystem::path& path) {
  return import_outcome_table_csv(textio::read_file(path));
}

}  // namespace sivar
