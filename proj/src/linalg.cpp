#include "sbv/linalg.hpp"

#include <cmath>
#include <string>

#include "sbv/errors.hpp"

namespace sbv {

void cholesky_in_place(Eigen::Ref<Eigen::MatrixXd> a, std::string_view context) {
  if (a.rows() != a.cols()) throw UsageError("cholesky: matrix is not square");
  if (a.rows() == 0) return;
  // Same kernel as Eigen::LLT, called directly so the failing column is known.
  const Eigen::Index pivot = Eigen::internal::llt_inplace<double, Eigen::Lower>::blocked(a);
  if (pivot >= 0) {
    throw NumericalError(std::string(context) + ": matrix not positive definite at pivot " +
                             std::to_string(pivot),
                         pivot);
  }
}

double log_det_from_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& lower) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

void forward_solve_in_place(const Eigen::Ref<const Eigen::MatrixXd>& lower,
                            Eigen::Ref<Eigen::MatrixXd> rhs) {
  if (lower.rows() == 0) return;
  lower.triangularView<Eigen::Lower>().solveInPlace(rhs);
}


}  // namespace sbv
