#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "sbv/dataset.hpp"
#include "sbv/distsim.hpp"
#include "sbv/kernel.hpp"
#include "sbv/vecchia.hpp"

namespace sbv {

/// Box on (sigma2, beta, tau2). nu and beta's length come from the init.
struct ParamBounds {
  double sigma2_lo = 1e-3;
  double sigma2_hi = 1e3;
  Eigen::VectorXd beta_lo;  // one entry per dimension
  Eigen::VectorXd beta_hi;
  double tau2_lo = 1e-8;
  double tau2_hi = 10.0;

  void validate(Index d) const;
  [[nodiscard]] bool contains(const KernelParams& p) const;
};

/// sigma2 in [1e-3, 1e3] var(y), beta in [1e-3, 1e2], tau2 in [1e-8, 10 var(y)].
ParamBounds default_bounds(const Dataset& data);
/// sigma2 = var(y), beta = 0.25 in every dimension, tau2 = 1e-4 var(y).
KernelParams default_init(const Dataset& data, double nu);

struct FitOptions {
  Index max_evals = 500;
  double rel_tol = 1e-8;
  /// Initial simplex edge in log space.
  double initial_step = 0.5;
  /// Outer rounds; each round after the first re-preprocesses with the current beta.
  int refit_rounds = 1;
  /// Called after each objective evaluation with the preprocessing it used.
  std::function<void(const Preprocessed&, const KernelParams&, double)> on_evaluation;
};

struct FitResult {
  KernelParams theta_hat;
  std::vector<double> loglik_trace;  // one value per evaluation, -inf on failure
  Index iterations = 0;
  bool converged = false;
  Eigen::VectorXd relevance;
  double loglik = 0.0;
  std::uint64_t fingerprint = 0;  // of the final round's preprocessing
  NnsStats nns_stats;
  double imbalance = 1.0;
  double seconds = 0.0;
};

/// Maximizes the Vecchia log-likelihood over log(sigma2, beta, tau2) by
/// bounded Nelder-Mead. Preprocessing is built once per round from the
/// round's starting beta. CV and BV tie all beta entries to one value.
FitResult mle_fit(const Dataset& data, const VecchiaConfig& config, const ParamBounds& bounds,
                  const KernelParams& init, const FitOptions& options, WorkerGroup& group);

/// SV fit on a uniform random subsample (kept in original row order).
KernelParams warm_start_beta(const Dataset& data, Index subsample_size, const VecchiaConfig& config,
                             const ParamBounds& bounds, const KernelParams& init, std::uint64_t seed,
                             const FitOptions& options, WorkerGroup& group);

/// Exact minus Vecchia log-likelihood, both at y = 0. X must be normalized.
double kl_divergence(PointsRef X, const KernelParams& params, const VecchiaConfig& config, WorkerGroup& group);

double mspe(VectorRef predictions, VectorRef truth);
/// Percent: 100 sqrt(mean(((pred - truth) / truth)^2)).
double rmspe(VectorRef predictions, VectorRef truth);

}  // namespace sbv
