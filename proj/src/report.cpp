#include "hpoerm/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <tuple>

#include "hpoerm/errors.hpp"
#include "hpoerm/svg_plot.hpp"

namespace hpoerm {

namespace {

struct SeriesDef {
  const char* name;
  const char* column;
  bool plotted;
};

const std::vector<SeriesDef>& series_for(const std::string& experiment) {
  static const std::vector<SeriesDef> choice{{"never_retrain", "excess_risk_holdin", true},
                                             {"always_retrain", "excess_risk_retrained", true},
                                             {"choice", "excess_risk_choice", true},
                                             {"speedup", "speedup", false}};
  static const std::vector<SeriesDef> tolerance{{"approx", "excess_risk_holdin", true},
                                                {"exact", "excess_risk_exact", true},
                                                {"speedup", "speedup", false},
                                                {"speedup_honest", "speedup_honest", false}};
  static const std::vector<SeriesDef> h3{{"h3", "excess_risk_h3", true},
                                         {"exact_retrain", "excess_risk_exact_retrain", true},
                                         {"speedup", "speedup", false},
                                         {"final_rho_out", "final_rho_out", false}};
  static const std::vector<SeriesDef> none;
  if (experiment == "choice") return choice;
  if (experiment == "tolerance") return tolerance;
  if (experiment == "h3") return h3;
  return none;
}

std::string cell_of(const CsvTable& t, std::size_t row, const std::string& experiment) {
  const std::string mu = "mu" + format_double(t.number(row, "mu_fraction"));
  if (experiment == "choice") {
    return mu + "_rin" + format_double(t.number(row, "rho_in")) + "_rout" + format_double(t.number(row, "rho_out"));
  }
  return mu + "_gamma" + format_double(t.number(row, "gamma"));
}

bool is_error_row(const CsvTable& t, std::size_t row) {
  return t.has_column("error") && !t.text(row, "error").empty();
}

}  // namespace

Summary summarize(std::span<const double> values) {
  Summary s;
  // Sums are taken relative to the first value, so equal values give an
  // exactly zero spread.
  double shift = 0.0, total = 0.0, sq = 0.0;
  for (const double v : values) {
    if (std::isnan(v)) continue;
    if (s.count == 0) shift = v;
    total += v - shift;
    sq += (v - shift) * (v - shift);
    ++s.count;
  }
  if (s.count == 0) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const auto k = static_cast<double>(s.count);
  s.mean = shift + total / k;
  if (s.count > 1) s.std_error = std::sqrt(std::max(0.0, (sq - total * total / k) / (k - 1.0)) / k);
  return s;
}

std::vector<AggregateRow> aggregate(const CsvTable& t) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, std::vector<std::size_t>> groups;
  if (t.rows.empty()) return {};
  if (!t.has_column("experiment")) return {};
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (is_error_row(t, r)) continue;
    const std::string& experiment = t.text(r, "experiment");
    if (series_for(experiment).empty()) {
      throw ParseError("unknown experiment '" + experiment + "'", t.row_lines[r]);
    }
    const auto n = static_cast<std::size_t>(t.number(r, "n"));
    groups[{experiment, cell_of(t, r, experiment), n}].push_back(r);
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, rows] : groups) {
    const auto& [experiment, cell, n] = key;
    for (const auto& def : series_for(experiment)) {
      if (!t.has_column(def.column)) continue;
      std::vector<double> v;
      for (const auto r : rows) v.push_back(t.number(r, def.column));
      out.push_back({experiment, cell, n, def.name, summarize(v)});
    }
  }
  return out;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& out) {
  out << kSchemaLine << '\n';
  write_csv_row(out, {"experiment", "cell", "n", "series", "mean", "stderr", "count"});
  for (const auto& r : rows) {
    write_csv_row(out, {r.experiment, r.cell, std::to_string(r.n), r.series, format_double(r.summary.mean),
                        format_double(r.summary.std_error), std::to_string(r.summary.count)});
  }
}

ReportOutput report(const std::vector<std::string>& csv_paths, const std::string& out_dir) {
  ReportOutput out;
  for (const auto& path : csv_paths) {
    const CsvTable t = read_csv_file(path);
    if (t.rows.empty()) {
      out.warnings.push_back(path + ": no rows");
      continue;
    }
    if (!t.has_column("experiment")) {
      out.warnings.push_back(path + ": not an experiment table, skipped");
      continue;
    }
    auto part = aggregate(t);
    if (part.empty()) out.warnings.push_back(path + ": every row carries an error");
    for (auto& r : part) out.table.push_back(std::move(r));
  }

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(std::filesystem::path(out_dir) / "summary.csv");
    if (!f) throw Error("cannot write " + out_dir + "/summary.csv");
    write_aggregate_csv(out.table, f);
  }
  if (out.table.empty()) {
    out.warnings.push_back("nothing to aggregate; no plots written");
    return out;
  }

  // One plot per (experiment, cell); the table is sorted by n within a cell.
  std::map<std::pair<std::string, std::string>, std::vector<PlotSeries>> plots;
  for (const auto& r : out.table) {
    const auto& defs = series_for(r.experiment);
    const auto def = std::find_if(defs.begin(), defs.end(), [&](const SeriesDef& d) { return r.series == d.name; });
    if (def == defs.end() || !def->plotted) continue;
    auto& list = plots[{r.experiment, r.cell}];
    auto s = std::find_if(list.begin(), list.end(), [&](const PlotSeries& p) { return p.name == r.series; });
    if (s == list.end()) {
      list.push_back({r.series, {}, {}, {}});
      s = list.end() - 1;
    }
    s->x.push_back(static_cast<double>(r.n));
    s->y.push_back(r.summary.mean);
    s->y_err.push_back(r.summary.std_error);
  }
  for (const auto& [key, series] : plots) {
    const auto& [experiment, cell] = key;
    PlotSpec spec;
    spec.title = experiment + " " + cell;
    spec.x_label = "n";
    spec.y_label = "excess risk";
    const std::string name = experiment + "_" + cell + ".svg";
    std::ofstream f(std::filesystem::path(out_dir) / name);
    if (!f) throw Error("cannot write " + name);
    f << render_line_plot(spec, series);
    out.plot_files.push_back(name);
  }
  return out;
}

}  // namespace hpoerm
