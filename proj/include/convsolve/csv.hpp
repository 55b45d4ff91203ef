#pragma once

#include <map>
#include <string>
#include <vector>

namespace convsolve {

// Numeric CSV table: a header row of column names followed by rows of
// numbers. Lines starting with '#' are comments; comments of the form
// "# key=value" are collected into `meta`.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::string> meta;

  // Index of a column by name; throws StructuralError when absent.
  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<string>");

}  // namespace convsolve
