#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sbv {

/// Raised when a caller violates a documented precondition
/// (dimension mismatch, out-of-range argument, invalid configuration).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by a Cholesky factorization that meets a non-positive pivot.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::ptrdiff_t pivot)
      : std::runtime_error(what), pivot_(pivot) {}

  /// Zero-based column index at which the factorization broke down.
  [[nodiscard]] std::ptrdiff_t pivot() const noexcept { return pivot_; }

 private:
  std::ptrdiff_t pivot_;
};

/// Malformed input file; `line` is one-based, 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sbv
