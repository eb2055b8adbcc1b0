#include "sbv/kernel.hpp"

#include <cmath>
#include <string>

#include "sbv/errors.hpp"

namespace sbv {

namespace {

int twice_nu(double nu) {
  if (nu == 0.5) return 1;
  if (nu == 1.5) return 3;
  if (nu == 2.5) return 5;
  if (nu == 3.5) return 7;
  throw UsageError("unsupported Matern smoothness nu=" + std::to_string(nu) +
                   " (expected 0.5, 1.5, 2.5 or 3.5)");
}

// Half-integer reductions of 2^(1-nu)/Gamma(nu) r^nu K_nu(r); no sqrt(2 nu)
// rescaling of r.
inline double correlation(double r, int two_nu) {
  const double e = std::exp(-r);
  switch (two_nu) {
    case 1:
      return e;
    case 3:
      return (1.0 + r) * e;
    case 5:
      return (1.0 + r * (1.0 + r * (1.0 / 3.0))) * e;
    default:
      return (1.0 + r * (1.0 + r * (2.0 / 5.0 + r * (1.0 / 15.0)))) * e;
  }
}

inline double scaled_sq(const double* x, const double* y, const double* inv_beta, Index d) {
  double s = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double t = (x[k] - y[k]) * inv_beta[k];
    s += t * t;
  }
  return s;
}

void check_dims(PointsRef a, const KernelParams& params) {
  if (a.rows() != params.dim()) {
    throw UsageError("point dimension " + std::to_string(a.rows()) +
                     " does not match beta length " + std::to_string(params.dim()));
  }
}

CovMatrix cross_impl(PointsRef a, PointsRef b, const KernelParams& params) {
  check_dims(a, params);
  check_dims(b, params);
  const int two_nu = twice_nu(params.nu);
  const Eigen::VectorXd inv = params.beta.cwiseInverse();
  const Index d = a.rows();
  CovMatrix out(a.cols(), b.cols());
  for (Index j = 0; j < b.cols(); ++j) {
    const double* bj = b.col(j).data();
    for (Index i = 0; i < a.cols(); ++i) {
      const double r = std::sqrt(scaled_sq(a.col(i).data(), bj, inv.data(), d));
      out(i, j) = params.sigma2 * correlation(r, two_nu);
    }
  }
  return out;
}

}  // namespace

bool is_supported_smoothness(double nu) {
  return nu == 0.5 || nu == 1.5 || nu == 2.5 || nu == 3.5;
}

void KernelParams::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw UsageError("sigma2 must be positive");
  if (!(tau2 >= 0.0) || !std::isfinite(tau2)) throw UsageError("tau2 must be nonnegative");
  if (beta.size() == 0) throw UsageError("beta must be non-empty");
  for (Index i = 0; i < beta.size(); ++i) {
    if (!(beta[i] > 0.0) || !std::isfinite(beta[i])) {
      throw UsageError("beta[" + std::to_string(i) + "] must be positive");
    }
  }
  twice_nu(nu);
}

void KernelParams::validate(Index d) const {
  validate();
  if (beta.size() != d) {
    throw UsageError("beta has length " + std::to_string(beta.size()) + " but data dimension is " +
                     std::to_string(d));
  }
}

double scaled_distance(VectorRef x, VectorRef x2, VectorRef beta) {
  if (x.size() != x2.size() || x.size() != beta.size()) {
    throw UsageError("scaled_distance: dimension mismatch");
  }
  const Eigen::VectorXd inv = beta.cwiseInverse();
  return std::sqrt(scaled_sq(x.data(), x2.data(), inv.data(), x.size()));
}

double matern_correlation(double r, double nu) {
  if (!(r >= 0.0)) throw UsageError("matern: distance must be nonnegative");
  return correlation(r, twice_nu(nu));
}

double matern(double r, const KernelParams& params) {
  const double value = params.sigma2 * matern_correlation(r, params.nu);
  return r == 0.0 ? value + params.tau2 : value;
}

CovMatrix cov_matrix(PointsRef a, const KernelParams& params) {
  check_dims(a, params);
  const int two_nu = twice_nu(params.nu);
  const Eigen::VectorXd inv = params.beta.cwiseInverse();
  const Index d = a.rows();
  const Index n = a.cols();
  CovMatrix out(n, n);
  for (Index j = 0; j < n; ++j) {
    const double* aj = a.col(j).data();
    out(j, j) = params.sigma2 + params.tau2;
    for (Index i = j + 1; i < n; ++i) {
      const double r = std::sqrt(scaled_sq(a.col(i).data(), aj, inv.data(), d));
      const double v = params.sigma2 * correlation(r, two_nu);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

CovMatrix cov_matrix(PointsRef a, PointsRef b, const KernelParams& params) {
  if (a.data() == b.data() && a.cols() == b.cols() && a.rows() == b.rows() &&
      a.outerStride() == b.outerStride()) {
    return cov_matrix(a, params);
  }
  return cross_impl(a, b, params);
}

CovMatrix cross_cov_matrix(PointsRef a, PointsRef b, const KernelParams& params) {
  return cross_impl(a, b, params);
}

Eigen::MatrixXd gather_points(PointsRef points, std::span<const Index> columns) {
  Eigen::MatrixXd out(points.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.col(static_cast<Index>(k)) = points.col(columns[k]);
  }
  return out;
}

}  // namespace sbv
