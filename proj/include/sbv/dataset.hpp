#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "sbv/kernel.hpp"

namespace sbv {

inline constexpr Index kMaxDimension = 64;

/// Inputs, responses and a stable identity per point.
/// `points` holds one point per column (d x n).
struct Dataset {
  Eigen::MatrixXd points;
  Eigen::VectorXd responses;
  std::vector<std::int64_t> global_ids;

  [[nodiscard]] Index size() const { return points.cols(); }
  [[nodiscard]] Index dim() const { return points.rows(); }

  /// Finite values, unique ids, 1 <= d <= kMaxDimension, sizes consistent.
  void validate() const;

  /// Ids 0..n-1. `responses` may be empty, in which case zeros are used.
  static Dataset from_points(Eigen::MatrixXd points, Eigen::VectorXd responses = {});

  /// Rows in the given order; ids are carried over.
  [[nodiscard]] Dataset subset(std::span<const Index> rows) const;
};

enum class NormalizeMode { MinMax, Auto, None };

NormalizeMode parse_normalize_mode(const std::string& text);

/// Affine map taking each input coordinate onto [0, 1].
struct UnitCubeTransform {
  Eigen::VectorXd lower;
  Eigen::VectorXd scale;  // upper - lower; 1 for constant columns

  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
  [[nodiscard]] bool is_identity() const;
};

/// Fits the transform to `points`. Auto leaves data already inside the unit
/// cube untouched; None always returns the identity.
UnitCubeTransform fit_unit_cube(const Eigen::MatrixXd& points, NormalizeMode mode);

/// Rescales responses to mean 1 and returns the factor applied.
/// Throws UsageError when the mean is zero.
double normalize_response_mean(Dataset& data);

}  // namespace sbv
