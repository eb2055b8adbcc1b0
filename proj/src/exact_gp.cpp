#include "sbv/exact_gp.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "sbv/errors.hpp"
#include "sbv/linalg.hpp"
#include "sbv/rng.hpp"

namespace sbv {

void check_exact_size(Index n) {
  if (n > kExactOracleLimit) {
    throw UsageError("exact GP limited to n <= " + std::to_string(kExactOracleLimit) + ", got n=" +
                     std::to_string(n));
  }
}

double exact_loglik(PointsRef points, VectorRef y, const KernelParams& params) {
  const Index n = points.cols();
  if (n < 1) throw UsageError("exact_loglik: empty point set");
  if (y.size() != n) throw UsageError("exact_loglik: response length mismatch");
  check_exact_size(n);
  params.validate(points.rows());
  Eigen::MatrixXd sigma = cov_matrix(points, params);
  cholesky_in_place(sigma, "exact covariance");
  Eigen::VectorXd alpha = y;
  forward_solve_in_place(sigma, alpha);
  return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) -
         0.5 * log_det_from_cholesky(sigma) - 0.5 * alpha.squaredNorm();
}

void clamp_variances(Eigen::Ref<Eigen::VectorXd> variance) {
  for (Index i = 0; i < variance.size(); ++i) {
    if (variance[i] < 0.0) {
      if (variance[i] > -1e-10) {
        variance[i] = 0.0;
      } else {
        throw NumericalError("negative predictive variance " + std::to_string(variance[i]) +
                                 " at target " + std::to_string(i),
                             i);
      }
    }
  }
}

PointPrediction exact_predict(PointsRef points, VectorRef y, PointsRef targets,
                              const KernelParams& params) {
  const Index n = points.cols();
  if (y.size() != n) throw UsageError("exact_predict: response length mismatch");
  if (targets.rows() != points.rows()) throw UsageError("exact_predict: target dimension mismatch");
  check_exact_size(n);
  params.validate(points.rows());

  Eigen::MatrixXd sigma = cov_matrix(points, params);
  cholesky_in_place(sigma, "exact covariance");
  Eigen::MatrixXd cross = cross_cov_matrix(points, targets, params);
  forward_solve_in_place(sigma, cross);
  Eigen::VectorXd alpha = y;
  forward_solve_in_place(sigma, alpha);

  PointPrediction out;
  out.mean = cross.transpose() * alpha;
  out.variance = (params.sigma2 + params.tau2) - cross.colwise().squaredNorm().transpose().array();
  clamp_variances(out.variance);
  return out;
}

Eigen::VectorXd gp_simulate(PointsRef points, const KernelParams& params, std::uint64_t seed) {
  const Index n = points.cols();
  check_exact_size(n);
  params.validate(points.rows());

  std::vector<Index> representative(static_cast<std::size_t>(n));
  std::vector<Index> unique_cols;
  if (params.tau2 == 0.0) {
    std::map<std::vector<double>, Index> seen;
    for (Index i = 0; i < n; ++i) {
      std::vector<double> key(points.col(i).data(), points.col(i).data() + points.rows());
      auto [it, inserted] = seen.emplace(std::move(key), static_cast<Index>(unique_cols.size()));
      if (inserted) unique_cols.push_back(i);
      representative[static_cast<std::size_t>(i)] = it->second;
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      representative[static_cast<std::size_t>(i)] = i;
      unique_cols.push_back(i);
    }
  }

  const Eigen::MatrixXd unique_points = gather_points(points, unique_cols);
  Eigen::MatrixXd sigma = cov_matrix(unique_points, params);
  cholesky_in_place(sigma, "simulation covariance");

  Eigen::VectorXd z(unique_points.cols());
  Rng rng(seed);
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  const Eigen::VectorXd unique_y = sigma.triangularView<Eigen::Lower>() * z;

  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) y[i] = unique_y[representative[static_cast<std::size_t>(i)]];
  return y;
}

}  // namespace sbv
