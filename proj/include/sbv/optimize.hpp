#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace sbv {

struct NelderMeadOptions {
  Eigen::Index max_evals = 500;
  /// Stop once (f_worst - f_best) <= rel_tol * max(1, |f_best|) over the simplex.
  double rel_tol = 1e-8;
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::Index evals = 0;
  bool converged = false;
};

/// Bounded Nelder-Mead minimization with the dimension-adaptive coefficients
/// of Gao and Han (2012). Trial points are projected onto [lower, upper]
/// before evaluation; non-finite objective values count as +inf. Never more
/// than max_evals calls to `f`.
NelderMeadResult minimize_nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                      const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper, const NelderMeadOptions& options);

}  // namespace sbv
