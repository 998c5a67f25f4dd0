#pragma once

// Minimal CSV support for result files.
//
// Doubles are written in shortest round-trip form (std::to_chars), so output
// bytes depend only on the values. Lines starting with '#' are comments; the
// first non-comment line is the header. Fields never contain commas.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hpoerm {

inline constexpr std::string_view kSchemaLine = "# schema=v1";

std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line of each row

  // Index of a header column; throws ParseError when missing.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  double number(std::size_t row, std::string_view name) const;
  const std::string& text(std::size_t row, std::string_view name) const;
};

// Throws ParseError with the offending line number on ragged rows.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace hpoerm
