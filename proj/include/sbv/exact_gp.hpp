#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "sbv/kernel.hpp"

namespace sbv {

/// Dense O(n^3) oracle size limit.
inline constexpr Index kExactOracleLimit = 20000;

/// Throws UsageError when n is beyond kExactOracleLimit.
void check_exact_size(Index n);

/// Exact Gaussian log-likelihood of y under the kernel, by Cholesky.
double exact_loglik(PointsRef points, VectorRef y, const KernelParams& params);

struct PointPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Clamps variances in (-1e-10, 0) to zero; anything more negative is a
/// NumericalError.
void clamp_variances(Eigen::Ref<Eigen::VectorXd> variance);

/// Conditional mean and marginal variance at `targets` given (points, y).
PointPrediction exact_predict(PointsRef points, VectorRef y, PointsRef targets,
                              const KernelParams& params);

/// Zero-mean GP draw y = L z, with z from Rng(seed).normal().
///
/// With tau2 == 0 exactly repeated points are collapsed first, so duplicates
/// receive identical values and the covariance stays factorizable.
Eigen::VectorXd gp_simulate(PointsRef points, const KernelParams& params, std::uint64_t seed);

}  // namespace sbv
