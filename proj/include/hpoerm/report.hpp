#pragma once

// Aggregation of experiment CSVs into per-cell summaries and SVG plots.
//
// A cell is every setting of an experiment except n and the trial: (mu
// fraction, rho_in, rho_out) for choice rows, (mu fraction, gamma) for
// tolerance and h3 rows. Rows carrying an error are left out.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hpoerm/csv.hpp"

namespace hpoerm {

struct Summary {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(count); 0 for one value
  std::size_t count = 0;
};

// NaN values are ignored; an empty input has count 0 and NaN mean.
Summary summarize(std::span<const double> values);

struct AggregateRow {
  std::string experiment;
  std::string cell;
  std::size_t n = 0;
  std::string series;
  Summary summary;
};

std::vector<AggregateRow> aggregate(const CsvTable& rows);

void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& out);

struct ReportOutput {
  std::vector<AggregateRow> table;
  std::vector<std::string> plot_files;
  std::vector<std::string> warnings;
};

// Reads every CSV, writes summary.csv and one <experiment>_<cell>.svg per
// cell into out_dir. Throws ParseError on malformed input.
ReportOutput report(const std::vector<std::string>& csv_paths, const std::string& out_dir);

}  // namespace hpoerm
