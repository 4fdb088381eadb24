#include "qvdp/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qvdp/errors.hpp"

namespace qvdp {

bool Dataset::has_column(std::string_view name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

size_t Dataset::column_index(std::string_view name) const {
  for (size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return k;
  throw InvalidArgument("dataset has no column '" + std::string(name) + "'");
}

std::vector<double> Dataset::numeric(std::string_view name) const {
  const size_t k = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(parse_number(r[k]));
  return out;
}

void Dataset::append(std::vector<std::string> row) {
  if (row.size() != columns.size())
    throw ShapeMismatch("row has " + std::to_string(row.size()) + " fields, header has " +
                        std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view s) {
  if (s.empty() || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidArgument("not a number: '" + std::string(s) + "'");
  return v;
}

namespace {

void put_field(std::string& out, const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) {
    out += f;
    return;
  }
  out += '"';
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void put_row(std::string& out, const std::vector<std::string>& row) {
  for (size_t k = 0; k < row.size(); ++k) {
    if (k) out += ',';
    put_field(out, row[k]);
  }
  out += '\n';
}

}  // namespace

std::string csv_row(const std::vector<std::string>& row) {
  std::string out;
  put_row(out, row);
  return out;
}

std::string to_csv(const Dataset& data) {
  std::string out;
  put_row(out, data.columns);
  for (const auto& r : data.rows) put_row(out, r);
  return out;
}

Dataset parse_csv(std::string_view text, bool lenient) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  size_t i = 0;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  bool truncated = quoted;
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
    truncated = true;  // no terminating newline
  }
  if (records.empty()) throw InvalidArgument("CSV has no header row");

  Dataset out;
  out.columns = std::move(records.front());
  for (size_t r = 1; r < records.size(); ++r) {
    const bool last = r + 1 == records.size();
    if (records[r].size() != out.columns.size() || (last && truncated && lenient)) {
      if (lenient && last) break;
      throw InvalidArgument("CSV row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                            " fields, expected " + std::to_string(out.columns.size()));
    }
    out.rows.push_back(std::move(records[r]));
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  // Write-then-rename so a reader never sees half a file.
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write " + tmp.string());
    f << to_csv(data);
    if (!f) throw InvalidArgument("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Dataset read_csv(const std::filesystem::path& path, bool lenient) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), lenient);
}

Dataset concatenate(const std::vector<Dataset>& parts) {
  if (parts.empty()) return {};
  Dataset out;
  out.columns = parts.front().columns;
  for (const auto& p : parts) {
    if (p.columns != out.columns) throw ShapeMismatch("datasets have different columns");
    out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
  }
  return out;
}

}  // namespace qvdp
