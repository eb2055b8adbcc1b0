#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sbv/dataset.hpp"

namespace sbv {

/// Header plus a numeric body, one CSV row per matrix row.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;
};

/// Comma-separated, '.' decimal point, header required. Malformed cells,
/// ragged rows or an empty file raise ParseError with the 1-based line.
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Values written with 17 significant digits, enough to round-trip a double.
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string format_double(double v);

/// A trailing column named `y` is the response; every other column is an
/// input. Without a `y` column responses are zero and `has_response` false.
struct LoadedData {
  Dataset data;
  bool has_response = false;
  std::vector<std::string> input_names;
};

LoadedData dataset_from_table(const CsvTable& table);
LoadedData read_dataset(const std::filesystem::path& path);

/// Header x1..xd,y.
CsvTable dataset_to_table(const Dataset& data);

}  // namespace sbv
