#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace sbv {

/// Flat `key = value` settings. `#` starts a comment; blank lines are
/// ignored; a repeated key is a parse error. Lists are comma-separated.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  [[nodiscard]] bool has(const std::string& key) const;
  [[nodiscard]] std::string get_string(const std::string& key) const;
  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] std::int64_t get_int(const std::string& key) const;
  [[nodiscard]] std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  [[nodiscard]] std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  [[nodiscard]] std::vector<double> get_doubles(const std::string& key) const;
  [[nodiscard]] std::vector<std::int64_t> get_ints(const std::string& key) const;
  [[nodiscard]] std::vector<std::string> get_strings(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Throws UsageError naming the first key not present in `known`.
  void require_known(const std::set<std::string>& known) const;
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
};

/// Strict textual number parsing (whole string, no locale).
double parse_double(const std::string& text);
std::int64_t parse_int(const std::string& text);

}  // namespace sbv
