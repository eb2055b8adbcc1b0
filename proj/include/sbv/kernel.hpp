#pragma once

#include <Eigen/Dense>
#include <span>

namespace sbv {

using Index = Eigen::Index;

/// Points are stored one per column (d x n), so a point is a contiguous slice.
using PointsRef = Eigen::Ref<const Eigen::MatrixXd>;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Dense covariance matrix, column-major.
using CovMatrix = Eigen::MatrixXd;

/// Covariance hyperparameters of the scaled Matern kernel.
struct KernelParams {
  double sigma2 = 1.0;   // process variance
  Eigen::VectorXd beta;  // per-dimension range
  double nu = 3.5;       // smoothness; 0.5, 1.5, 2.5 or 3.5
  double tau2 = 0.0;     // nugget variance

  [[nodiscard]] Index dim() const { return beta.size(); }

  /// Throws UsageError if any invariant is broken.
  void validate() const;
  /// validate() plus beta.size() == d.
  void validate(Index d) const;

  /// Elementwise 1/beta.
  [[nodiscard]] Eigen::VectorXd relevance() const { return beta.cwiseInverse(); }
};

/// True for the half-integer smoothness values with closed forms.
bool is_supported_smoothness(double nu);

/// ( sum_i (x_i - x2_i)^2 / beta_i^2 )^(1/2)
double scaled_distance(VectorRef x, VectorRef x2, VectorRef beta);

/// Unit-variance Matern correlation 2^(1-nu)/Gamma(nu) r^nu K_nu(r), with
/// value 1 at r = 0. No nugget.
double matern_correlation(double r, double nu);

/// sigma2 * matern_correlation(r) plus tau2 when r == 0 exactly.
double matern(double r, const KernelParams& params);

/// Covariance of a point set with itself: exactly symmetric, tau2 on the
/// diagonal only.
CovMatrix cov_matrix(PointsRef a, const KernelParams& params);

/// Cross-covariance between two point sets, rows follow `a`, columns `b`.
/// When `a` and `b` alias the same storage this is the same-set matrix above.
CovMatrix cov_matrix(PointsRef a, PointsRef b, const KernelParams& params);

/// Cross-covariance that never carries the nugget, even for aliased inputs.
CovMatrix cross_cov_matrix(PointsRef a, PointsRef b, const KernelParams& params);

/// Copies the selected columns of `points` into a contiguous d x k matrix.
Eigen::MatrixXd gather_points(PointsRef points, std::span<const Index> columns);

}  // namespace sbv
