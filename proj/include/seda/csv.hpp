#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace seda {

/// Shortest decimal representation that parses back to exactly the same
/// double. Formatting a parsed value reproduces the original string, so CSV
/// files are a write/read/write fixed point.
inline std::string format_double(double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw std::runtime_error("double formatting failed");
  return std::string(buffer, ptr);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::invalid_argument("not a number: " + std::string(text));
  return value;
}

/// Minimal comma-separated table; fields must not contain commas, quotes, or
/// newlines (all emitters here write numbers and identifiers only).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string to_csv_text(const CsvTable& table) {
  std::ostringstream out;
  auto write_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw std::invalid_argument("csv row width differs from header");
    write_row(row);
  }
  return out.str();
}

inline CsvTable parse_csv_text(const std::string& text) {
  CsvTable table;
  std::istringstream lines(text);
  std::string line;
  bool first = true;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && lines.eof()) break;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream cells(line);
    while (std::getline(cells, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (line.empty()) fields.push_back("");
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw std::invalid_argument("csv row width differs from header");
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw std::invalid_argument("csv text is empty");
  return table;
}

inline void write_csv_file(const std::filesystem::path& path,
                           const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write csv: " + path.string());
  out << to_csv_text(table);
  if (!out) throw std::runtime_error("failed writing csv: " + path.string());
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read csv: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv_text(buffer.str());
}

/// Reads a benefit matrix: one CSV row per agent, comma-separated reals, no
/// header line.
inline Eigen::MatrixXd read_benefit_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::string field;
    std::istringstream cells(line);
    while (std::getline(cells, field, ',')) row.push_back(parse_double(field));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("benefit rows have differing widths");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("benefit matrix is empty");
  Eigen::MatrixXd matrix(rows.size(), rows.front().size());
  for (int i = 0; i < matrix.rows(); ++i)
    for (int j = 0; j < matrix.cols(); ++j) matrix(i, j) = rows[i][j];
  return matrix;
}

}  // namespace seda
