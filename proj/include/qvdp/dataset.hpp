#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qvdp {

/// Header plus rows of text fields; numbers use the shortest round-trip form.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  bool empty() const { return rows.empty(); }
  bool has_column(std::string_view name) const;
  // Throws InvalidArgument naming the missing column.
  size_t column_index(std::string_view name) const;
  // Parses a column as doubles; empty fields become NaN.
  std::vector<double> numeric(std::string_view name) const;
  void append(std::vector<std::string> row);
};

std::string format_number(double v);
double parse_number(std::string_view s);

std::string to_csv(const Dataset& data);
// One CSV line (with newline) for appending.
std::string csv_row(const std::vector<std::string>& row);
// Strict parse; with `lenient` a malformed final row (a crash mid-write) is dropped.
Dataset parse_csv(std::string_view text, bool lenient = false);

void write_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_csv(const std::filesystem::path& path, bool lenient = false);

// Row-wise concatenation of datasets that share a header.
Dataset concatenate(const std::vector<Dataset>& parts);

}  // namespace qvdp
