#pragma once

#include <Eigen/Dense>
#include <string_view>

namespace sbv {

/// Lower Cholesky factor written over the lower triangle of `a`; the strict
/// upper triangle is left unspecified. Throws NumericalError carrying the
/// failing pivot, with `context` prefixed to the message.
void cholesky_in_place(Eigen::Ref<Eigen::MatrixXd> a, std::string_view context);

/// 2 * sum(log L_ii) for a lower Cholesky factor.
double log_det_from_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& lower);

/// Solves L X = B in place (L lower triangular); vectors bind as one column.
void forward_solve_in_place(const Eigen::Ref<const Eigen::MatrixXd>& lower,
                            Eigen::Ref<Eigen::MatrixXd> rhs);

}  // namespace sbv
