#include "sivar/pipeline.hpp"

#include "sivar/error.hpp"
#include "sivar/parallel.hpp"
#include "sivar/svg.hpp"
#include "sivar/textio.hpp"
#include "sivar/touchstone.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace sivar {

namespace {

using json = nlohmann::json;

std::string slug(std::string_view name) {
  std::string out;
  for (unsigned char c : name) {
    if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

LinkComponents load_fixed(const AnalyzeOptions& options) {
  LinkComponents fixed;
  auto load = [&](const std::filesystem::path& p) {
    return to_mixed_mode(read_touchstone(p)).differential();
  };
  for (const auto& p : options.fixed_before) fixed.before.push_back(load(p));
  for (const auto& p : options.fixed_after) fixed.after.push_back(load(p));
  return fixed;
}

std::string net_key(const NetRecord& r) { return r.board_serial + "/" + r.net_name; }

std::optional<double> mean_length(const NetRecord& r) {
  if (!r.len_p_in || !r.len_n_in) return std::nullopt;
  return r.mean_length_in();
}

void write_both(const ResultTable& t, const std::filesystem::path& base) {
  export_table(t, ExportFormat::Csv, base.string() + ".csv");
  export_table(t, ExportFormat::Json, base.string() + ".json");
}

bool is_scd21_column(const std::string& name) { return name.rfind("SCD21 (dB):", 0) == 0; }

std::string xy_csv(const std::string& xn, const std::string& yn, const std::vector<double>& x,
                   const std::vector<double>& y) {
  std::string out = textio::csv_join({xn, yn}) + "\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    out += textio::format_number(x[i]) + "," + textio::format_number(y[i]) + "\n";
  return out;
}

}  // namespace

DriverWaveform DriverOptions::make() const {
  const double ui = 1e-9 / rate_gbps;
  if (file) {
    DriverWaveform d = DriverWaveform::load_csv(*file);
    if (std::abs(d.bit_period_s - ui) > 1e-9 * ui)
      throw Error("driver file UI " + textio::format_number(d.bit_period_s) + " s does not match the data rate");
    return d;
  }
  return DriverWaveform::trapezoid(ui, samples_per_ui, swing_v, edge_s);
}

double AnalyzeResult::failure_fraction() const {
  return table.rows.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(table.rows.size());
}

OutcomeRow analyze_network(const NetworkData& net, const NetRecord& rec, double v_ref_m_per_s,
                           const AnalyzeOptions& options, const LinkComponents& fixed, const DriverWaveform& driver,
                           const std::vector<std::uint8_t>& pattern) {
  const MixedModeNetwork mm = to_mixed_mode(net);
  OutcomeRow row = frequency_outcomes(net, mm, rec, v_ref_m_per_s, options.outcomes);
  if (options.impedance) row.impedance_odd_ohm = windowed_impedance(step_response(mm)).odd_ohm;
  if (options.eye) {
    const EyeMetrics m = simulate_link(mm, fixed, driver, pattern);
    row.eye_height_v = m.eye_height_v;
    row.eye_width_ui = m.eye_width_ui;
    row.eye_jitter_ui = m.jitter_ui;
    row.vertical_eye_noise_v = m.vertical_eye_noise_v;
  }
  return row;
}

AnalyzeResult analyze(const Manifest& manifest, const AnalyzeOptions& options) {
  AnalyzeResult result;
  result.table.columns = outcome_columns(options.outcomes);
  if (options.outcomes.skew_freqs_hz.empty()) throw Error("analyze: at least one skew frequency is required");

  std::vector<NetRecord> records = manifest.records;
  std::sort(records.begin(), records.end(), [](const NetRecord& a, const NetRecord& b) {
    return std::tie(a.board_serial, a.net_name) < std::tie(b.board_serial, b.net_name);
  });

  TouchstoneReadOptions read_opts;
  read_opts.expected_z_ref_ohm = options.z_ref_ohm;
  auto read = [&](const NetRecord& r, std::vector<std::string>* warnings) {
    TouchstoneReadOptions o = read_opts;
    o.port_map = r.port_map;
    return read_touchstone(manifest.resolve(r), o, warnings);
  };

  // Reference velocity from the longest net that can be read.
  std::vector<std::size_t> by_length;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (mean_length(records[i])) by_length.push_back(i);
  std::stable_sort(by_length.begin(), by_length.end(), [&](std::size_t a, std::size_t b) {
    return *mean_length(records[a]) > *mean_length(records[b]);
  });
  for (std::size_t i : by_length) {
    try {
      const NetworkData net = read(records[i], nullptr);
      result.v_ref_m_per_s =
          propagation_velocity(net, *mean_length(records[i]), options.outcomes.skew_freqs_hz.front());
      result.v_ref_net = net_key(records[i]);
      break;
    } catch (const Error&) {
    }
  }
  if (result.v_ref_m_per_s > 0.0)
    result.log.push_back("reference velocity " + textio::format_number(result.v_ref_m_per_s) + " m/s from " +
                         result.v_ref_net);
  else if (!records.empty())
    result.log.push_back("no readable net with lengths; skew outcomes unavailable");

  const LinkComponents fixed = options.eye ? load_fixed(options) : LinkComponents{};
  const DriverWaveform driver = options.driver.make();
  const std::vector<std::uint8_t> pattern = prbs(options.prbs_order);

  const std::size_t n = records.size();
  std::vector<OutcomeTable::Row> rows(n);
  std::vector<std::vector<std::string>> notes(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    OutcomeTable::Row& row = rows[i];
    row.record = records[i];
    row.values.assign(result.table.columns.size(), std::nullopt);
    try {
      if (!(result.v_ref_m_per_s > 0.0)) throw Error("no reference velocity");
      const NetworkData net = read(records[i], &notes[i]);
      const OutcomeRow out = analyze_network(net, records[i], result.v_ref_m_per_s, options, fixed, driver, pattern);
      row.values = outcome_values(out, options.outcomes);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& w : notes[i]) result.log.push_back(net_key(records[i]) + ": warning: " + w);
    if (rows[i].status != "ok") {
      ++result.failed;
      result.log.push_back(net_key(records[i]) + ": " + rows[i].status);
    }
  }
  result.table.rows = std::move(rows);
  result.log.push_back(std::to_string(n - result.failed) + " of " + std::to_string(n) + " nets analyzed");
  return result;
}

void write_analysis(const AnalyzeResult& result, const std::filesystem::path& out_dir) {
  export_table(result.table, ExportFormat::Csv, out_dir / "outcomes.csv");
  export_table(result.table, ExportFormat::Json, out_dir / "outcomes.json");
  std::string log;
  for (const auto& l : result.log) log += l + "\n";
  textio::write_file(out_dir / "analyze.log", log);
}

std::map<std::string, double> parse_tester_sigma(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("tester sigma: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("tester sigma: top level must be an object of outcome -> sigma");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number() || v.get<double>() < 0.0)
      throw Error("tester sigma: entry '" + k + "' must be a non-negative number");
    out[k] = v.get<double>();
  }
  return out;
}

ResultTable global_summary_table(const OutcomeTable& table, const ReportOptions& options) {
  ResultTable t;
  t.title = "Global summary statistics";
  t.header = {"Calculation", "Unit", "N", "Mean", "Std Dev", "Min", "Max", "Tester Repeatability (Std Dev)",
              "Skewness", "Kurtosis"};
  for (const auto& col : table.columns) {
    std::vector<double> v;
    for (const auto& [row, value] : table.column_values(col.name)) v.push_back(value);
    std::vector<Cell> r{col.name, col.unit, static_cast<double>(v.size())};
    if (v.size() >= 2) {
      const StatSummary s = summarize(v);
      r.insert(r.end(), {s.mean, s.std, s.min, s.max});
    } else {
      r.insert(r.end(), 4, Cell{});
    }
    const auto tester = options.tester_sigma.find(col.name);
    r.push_back(tester != options.tester_sigma.end() ? Cell{tester->second} : Cell{});
    if (v.size() >= 2) {
      const StatSummary s = summarize(v);
      r.push_back(s.skewness ? Cell{*s.skewness} : Cell{});
      r.push_back(s.kurtosis ? Cell{*s.kurtosis} : Cell{});
    } else {
      r.insert(r.end(), 2, Cell{});
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

ResultTable snv_table(const OutcomeTable& table, const ReportOptions& options) {
  ResultTable t;
  const std::string k = textio::format_number(options.sigma_k, 6);
  t.title = "Same net variation across boards";
  t.header = {"Calculation",
              "Unit",
              "SNV \xCF\x83",
              "Tester Repeatability \xCF\x83",
              "SNV \xCF\x83 (tester removed)",
              "Tester Dominated",
              "Deflated",
              "Nets Pooled",
              "Nets Dropped",
              "Mean",
              k + "\xCF\x83 Half-Width",
              k + "\xCF\x83 Half-Width (% of Mean)",
              "Note"};
  for (const auto& col : table.columns) {
    std::vector<Cell> r{col.name, col.unit};
    const NetGroups groups = same_net_grouping(table, col.name);
    std::vector<double> all;
    for (const auto& g : groups.values) all.insert(all.end(), g.begin(), g.end());
    PooledResult pooled;
    try {
      pooled = pooled_snv(groups.values);
    } catch (const Error& e) {
      r.insert(r.end(), 10, Cell{});
      r.push_back(std::string(e.what()));
      t.rows.push_back(std::move(r));
      continue;
    }
    r.push_back(pooled.sigma);
    const auto tester = options.tester_sigma.find(col.name);
    double sigma = pooled.sigma;
    if (tester != options.tester_sigma.end()) {
      const DeflateResult d = deflate_tester(pooled.sigma, tester->second);
      sigma = d.sigma;
      r.insert(r.end(), {tester->second, d.sigma, std::string(d.tester_dominated ? "yes" : "no"), std::string("yes")});
    } else {
      r.insert(r.end(), {Cell{}, Cell{}, Cell{}, std::string("no")});
    }
    r.push_back(static_cast<double>(pooled.groups_used));
    r.push_back(static_cast<double>(pooled.groups_dropped));
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    const auto [lo, hi] = k_sigma_interval(mean, sigma, options.sigma_k);
    r.push_back(mean);
    r.push_back(0.5 * (hi - lo));
    r.push_back(mean != 0.0 ? Cell{100.0 * 0.5 * (hi - lo) / std::abs(mean)} : Cell{});
    r.push_back(tester == options.tester_sigma.end() ? std::string("no tester sigma; undeflated") : std::string());
    t.rows.push_back(std::move(r));
  }
  return t;
}

namespace {

struct AnovaColumn {
  std::string outcome;
  std::optional<AnovaResult> result;
  std::vector<std::string> predictor_names;
  std::size_t n = 0;
  std::string note;
};

AnovaColumn anova_for(const OutcomeTable& table, const Column& col) {
  AnovaColumn out;
  out.outcome = col.name;
  const bool with_skew = is_scd21_column(col.name) && !table.columns.empty();
  std::optional<std::size_t> skew_idx;
  if (with_skew) {
    for (std::size_t i = 0; i < table.columns.size(); ++i)
      if (table.columns[i].name.rfind("Random Skew (ps):", 0) == 0) {
        skew_idx = i;
        break;
      }
  }
  const std::size_t idx = *table.column_index(col.name);
  std::vector<double> y, len, skew;
  std::vector<std::string> core, serial;
  for (const auto& r : table.rows) {
    const auto& v = r.values[idx];
    const auto l = mean_length(r.record);
    if (!v || !l) continue;
    if (skew_idx && !r.values[*skew_idx]) continue;
    y.push_back(*v);
    len.push_back(*l);
    core.push_back(std::to_string(r.record.routing_core));
    serial.push_back(r.record.board_serial);
    if (skew_idx) skew.push_back(std::abs(*r.values[*skew_idx]));
  }
  out.n = y.size();
  std::vector<PredictorSpec> preds{PredictorSpec::continuous(kPredictorLength, len)};
  auto levels = [](const std::vector<std::string>& v) { return std::set<std::string>(v.begin(), v.end()).size(); };
  if (levels(core) >= 2) preds.push_back(PredictorSpec::categorical(kPredictorCore, core));
  if (levels(serial) >= 2) preds.push_back(PredictorSpec::categorical(kPredictorSerial, serial));
  if (skew_idx) preds.push_back(PredictorSpec::continuous(kPredictorSkew, skew));
  for (const auto& p : preds) out.predictor_names.push_back(p.name);
  try {
    out.result = anova(y, preds);
  } catch (const Error& e) {
    out.note = e.what();
  }
  return out;
}

}  // namespace

ResultTable anova_table(const OutcomeTable& table) {
  std::vector<AnovaColumn> cols;
  for (const auto& c : table.columns) cols.push_back(anova_for(table, c));

  ResultTable t;
  t.title = "Analysis of variance summary";
  t.header = {"Term"};
  for (const auto& c : cols) {
    t.header.push_back(c.outcome + ": F-Ratio");
    t.header.push_back(c.outcome + ": F");
    t.header.push_back(c.outcome + ": p-value");
  }
  for (const std::string& term : {kPredictorLength, kPredictorCore, kPredictorSerial, kPredictorSkew}) {
    std::vector<Cell> r{term};
    bool any = false;
    for (const auto& c : cols) {
      const AnovaTerm* found = nullptr;
      if (c.result)
        for (const auto& at : c.result->terms)
          if (at.name == term) found = &at;
      if (found) {
        any = true;
        r.insert(r.end(), {found->mse_ratio, found->f_stat, found->p_value});
      } else {
        r.insert(r.end(), 3, Cell{});
      }
    }
    if (any || term != kPredictorSkew) t.rows.push_back(std::move(r));
  }
  std::vector<Cell> blocked{std::string("Residual \xCF\x83 (blocked)")};
  std::vector<Cell> count{std::string("N")};
  std::vector<Cell> note{std::string("Note")};
  for (const auto& c : cols) {
    blocked.push_back(c.result ? Cell{std::sqrt(c.result->residual_mse)} : Cell{});
    blocked.insert(blocked.end(), 2, Cell{});
    count.push_back(static_cast<double>(c.n));
    count.insert(count.end(), 2, Cell{});
    note.push_back(c.note.empty() ? Cell{} : Cell{c.note});
    note.insert(note.end(), 2, Cell{});
  }
  t.rows.push_back(std::move(blocked));
  t.rows.push_back(std::move(count));
  t.rows.push_back(std::move(note));
  return t;
}

void write_report(const OutcomeTable& table, const ReportOptions& options, const std::filesystem::path& out_dir,
                  ReportKind kind) {
  std::filesystem::create_directories(out_dir);
  if (kind == ReportKind::Full) write_both(global_summary_table(table, options), out_dir / "figure1");
  if (kind != ReportKind::Anova) write_both(snv_table(table, options), out_dir / "figure2");
  if (kind != ReportKind::Snv) write_both(anova_table(table), out_dir / "figure3");
  if (kind != ReportKind::Full) return;

  const auto plots = out_dir / "plots";
  for (const auto& col : table.columns) {
    std::vector<double> v;
    for (const auto& [row, value] : table.column_values(col.name)) v.push_back(value);
    if (v.empty()) continue;
    textio::write_file(plots / ("hist_" + slug(col.name) + ".svg"),
                       svg::histogram(v, {col.name, col.name + " [" + col.unit + "]", "Count"}));
  }
  auto scatter_vs = [&](const std::string& xcol, const std::string& ycol, const std::string& file) {
    const auto yi = table.column_index(ycol);
    if (!yi) return;
    const auto xi = xcol.empty() ? std::nullopt : table.column_index(xcol);
    if (!xcol.empty() && !xi) return;
    std::vector<double> x, y;
    for (const auto& r : table.rows) {
      const auto& yv = r.values[*yi];
      std::optional<double> xv = xi ? r.values[*xi] : mean_length(r.record);
      if (!yv || !xv) continue;
      x.push_back(*xv);
      y.push_back(*yv);
    }
    if (x.empty()) return;
    const std::string xname = xcol.empty() ? std::string("Net Length (in)") : xcol;
    textio::write_file(plots / (file + ".svg"), svg::scatter(x, y, {ycol + " vs " + xname, xname, ycol}));
    textio::write_file(plots / (file + ".csv"), xy_csv(xname, ycol, x, y));
  };
  scatter_vs("", column::kEyeHeight, "eye_height_vs_length");
  for (const auto& col : table.columns) {
    if (col.name.rfind("Random Skew (ps):", 0) == 0) {
      scatter_vs("", col.name, slug(col.name) + "_vs_length");
      break;
    }
  }
  for (const auto& col : table.columns) {
    if (!is_scd21_column(col.name)) continue;
    for (const auto& sk : table.columns) {
      if (sk.name.rfind("Random Skew (ps):", 0) == 0) {
        scatter_vs(sk.name, col.name, slug(col.name) + "_vs_skew");
        break;
      }
    }
    break;
  }
}

ResultTable sample_size_table(const std::vector<SampleSizeRow>& rows) {
  ResultTable t;
  t.title = "Sample size versus sigma error";
  t.header = {"n", "Trials", "Min Rel Error", "Max Rel Error", "Max |Rel Error|", "Q05", "Median", "Q95"};
  for (const auto& r : rows)
    t.rows.push_back({static_cast<double>(r.n), static_cast<double>(r.trials), r.min_rel_error, r.max_rel_error,
                      r.max_abs_rel_error, r.q05, r.q50, r.q95});
  return t;
}

void write_sample_size(const std::vector<SampleSizeRow>& rows, const std::filesystem::path& out_dir) {
  write_both(sample_size_table(rows), out_dir / "samplesize");
  std::vector<svg::Series> series(4);
  series[0].name = "max";
  series[1].name = "q95";
  series[2].name = "q05";
  series[3].name = "min";
  for (const auto& r : rows) {
    const double x = std::log10(static_cast<double>(r.n));
    for (auto& s : series) s.x.push_back(x);
    series[0].y.push_back(100.0 * r.max_rel_error);
    series[1].y.push_back(100.0 * r.q95);
    series[2].y.push_back(100.0 * r.q05);
    series[3].y.push_back(100.0 * r.min_rel_error);
  }
  textio::write_file(out_dir / "samplesize.svg",
                     svg::line_plot(series, {"Relative error of sample sigma", "log10(n)", "Error (%)"}));
}

EyeMetrics run_eye(const std::filesystem::path& s4p, const AnalyzeOptions& options, const std::filesystem::path& out_dir,
                   const PortMap& port_map) {
  TouchstoneReadOptions read_opts;
  read_opts.expected_z_ref_ohm = options.z_ref_ohm;
  read_opts.port_map = port_map;
  const MixedModeNetwork mm = to_mixed_mode(read_touchstone(s4p, read_opts));
  const LinkComponents fixed = load_fixed(options);
  std::vector<DiffBlock> chain = fixed.before;
  chain.push_back(mm.differential());
  chain.insert(chain.end(), fixed.after.begin(), fixed.after.end());
  const DriverWaveform driver = options.driver.make();
  const auto pattern = prbs(options.prbs_order);
  const EyeDiagram eye = synthesize_eye(cascade_chain(chain), driver, pattern);
  const EyeMetrics m = extract_metrics(eye);

  std::filesystem::create_directories(out_dir);
  textio::write_file(out_dir / "eye.csv", eye_csv(eye));
  std::vector<double> x(eye.traces.empty() ? 0 : eye.traces.front().size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = static_cast<double>(j) / static_cast<double>(eye.samples_per_ui);
  textio::write_file(out_dir / "eye.svg", svg::traces(x, eye.traces, {"Eye diagram", "Time (UI)", "Volts"}));
  json j{{"eye_height_v", textio::round_significant(m.eye_height_v)},
         {"eye_width_ui", textio::round_significant(m.eye_width_ui)},
         {"jitter_ui", textio::round_significant(m.jitter_ui)},
         {"vertical_eye_noise_v", textio::round_significant(m.vertical_eye_noise_v)}};
  textio::write_file(out_dir / "eye_metrics.json", j.dump(2) + "\n");
  return m;
}

}  // namespace sivar
