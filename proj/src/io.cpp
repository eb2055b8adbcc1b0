#include "sbv/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

#include "sbv/errors.hpp"

namespace sbv {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  std::vector<std::vector<double>> body;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto cells = split_row(line);
    if (!have_header) {
      for (const auto& c : cells)
        if (c.empty()) throw ParseError("csv: empty header field", number);
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ParseError("csv: expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       number);
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& c = cells[j];
      const char* first = c.data();
      const char* last = c.data() + c.size();
      if (first != last && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, row[j]);
      if (c.empty() || ec != std::errc() || ptr != last)
        throw ParseError("csv: invalid number '" + c + "' in column '" + table.header[j] + "'", number);
    }
    body.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("csv: missing header row", 0);
  table.rows.resize(static_cast<Eigen::Index>(body.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < body.size(); ++i)
    for (std::size_t j = 0; j < body[i].size(); ++j)
      table.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = body[i][j];
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  return read_csv(in);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc()) throw UsageError("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  for (std::size_t j = 0; j < table.header.size(); ++j) out << (j ? "," : "") << table.header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < table.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.rows.cols(); ++j) out << (j ? "," : "") << format_double(table.rows(i, j));
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  write_csv(out, table);
  if (!out) throw UsageError("write failed for '" + path.string() + "'");
}

LoadedData dataset_from_table(const CsvTable& table) {
  LoadedData out;
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  out.has_response = cols > 0 && table.header.back() == "y";
  const Eigen::Index d = out.has_response ? cols - 1 : cols;
  if (d < 1) throw UsageError("csv: no input columns");
  if (d > kMaxDimension) throw UsageError("csv: too many input columns");
  out.input_names.assign(table.header.begin(), table.header.begin() + d);
  Eigen::MatrixXd points = table.rows.leftCols(d).transpose();
  Eigen::VectorXd y = out.has_response ? Eigen::VectorXd(table.rows.col(d)) : Eigen::VectorXd();
  out.data = Dataset::from_points(std::move(points), std::move(y));
  out.data.validate();
  return out;
}

LoadedData read_dataset(const std::filesystem::path& path) { return dataset_from_table(read_csv(path)); }

CsvTable dataset_to_table(const Dataset& data) {
  CsvTable t;
  for (Eigen::Index j = 0; j < data.dim(); ++j) t.header.push_back("x" + std::to_string(j + 1));
  t.header.push_back("y");
  t.rows.resize(data.size(), data.dim() + 1);
  t.rows.leftCols(data.dim()) = data.points.transpose();
  t.rows.col(data.dim()) = data.responses;
  return t;
}

}  // namespace sbv
