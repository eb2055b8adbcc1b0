#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sbv/errors.hpp"
#include "sbv/exact_gp.hpp"
#include "sbv/kernel.hpp"

using namespace sbv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

KernelParams aniso(Index d, double tau2 = 1e-6) {
  KernelParams p;
  p.sigma2 = 1.7;
  p.beta = VectorXd::LinSpaced(d, 0.1, 0.6);
  p.nu = 2.5;
  p.tau2 = tau2;
  return p;
}

}  // namespace

TEST_CASE("scalar likelihood") {
  MatrixXd x(1, 1);
  x << 0.5;
  KernelParams p;
  p.beta = VectorXd::Ones(1);
  VectorXd y(1);
  y << 0.0;
  CHECK(exact_loglik(x, y, p) == doctest::Approx(-0.5 * std::log(2 * M_PI)).epsilon(1e-15));
  y << 1.0;
  CHECK(exact_loglik(x, y, p) == doctest::Approx(-0.5 * std::log(2 * M_PI) - 0.5).epsilon(1e-15));
}

TEST_CASE("likelihood matches the explicit-inverse oracle") {
  const MatrixXd x = oracle::uniform_points(3, 50, 11);
  const auto p = aniso(3);
  const VectorXd y = gp_simulate(x, p, 5);
  const MatrixXd k = oracle::covariance(x, x, p, true);
  const double ref = oracle::gaussian_logpdf(y, VectorXd::Zero(50), k);
  CHECK(std::abs(exact_loglik(x, y, p) - ref) <= 1e-8 * std::abs(ref));
}

TEST_CASE("likelihood is permutation invariant") {
  const MatrixXd x = oracle::uniform_points(2, 80, 3);
  const auto p = aniso(2);
  const VectorXd y = gp_simulate(x, p, 9);
  std::vector<Index> perm(80);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  MatrixXd xp(2, 80);
  VectorXd yp(80);
  for (Index i = 0; i < 80; ++i) {
    xp.col(i) = x.col(perm[i]);
    yp[i] = y[perm[i]];
  }
  CHECK(std::abs(exact_loglik(x, y, p) - exact_loglik(xp, yp, p)) < 1e-10 * std::abs(exact_loglik(x, y, p)));
}

TEST_CASE("non positive definite covariance reports the pivot") {
  MatrixXd x(1, 3);
  x << 0.1, 0.1, 0.4;
  KernelParams p;
  p.beta = VectorXd::Ones(1);
  p.tau2 = 0.0;
  VectorXd y = VectorXd::Zero(3);
  try {
    (void)exact_loglik(x, y, p);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.pivot() == 1);
  }
}

TEST_CASE("prediction matches the explicit-inverse oracle") {
  const MatrixXd x = oracle::uniform_points(2, 30, 21);
  const MatrixXd t = oracle::uniform_points(2, 5, 22);
  const auto p = aniso(2, 1e-4);
  const VectorXd y = gp_simulate(x, p, 1);
  const auto pred = exact_predict(x, y, t, p);

  MatrixXd all(2, 35);
  all << x, t;
  const MatrixXd k = oracle::covariance(all, all, p, true);
  VectorXd yall = VectorXd::Zero(35);
  yall.head(30) = y;
  std::vector<Index> given(30), target(5);
  std::iota(given.begin(), given.end(), Index{0});
  std::iota(target.begin(), target.end(), Index{30});
  const auto ref = oracle::condition(k, yall, target, given);
  for (Index i = 0; i < 5; ++i) {
    // Targets are new points, so their marginal carries the nugget too.
    CHECK(pred.mean[i] == doctest::Approx(ref.mean[i]).epsilon(1e-8));
    CHECK(pred.variance[i] == doctest::Approx(ref.cov(i, i)).epsilon(1e-8));
  }
}

TEST_CASE("prediction interpolates without a nugget and reverts far away") {
  const MatrixXd x = oracle::uniform_points(2, 20, 5);
  KernelParams p;
  p.beta = VectorXd::Constant(2, 0.2);
  p.tau2 = 0.0;
  const VectorXd y = gp_simulate(x, p, 2);
  MatrixXd t(2, 2);
  t.col(0) = x.col(7);
  t.col(1) << 1e4, -1e4;
  const auto pred = exact_predict(x, y, t, p);
  CHECK(pred.mean[0] == doctest::Approx(y[7]).epsilon(1e-8));
  CHECK(std::abs(pred.variance[0]) < 1e-8);
  CHECK(std::abs(pred.mean[1]) < 1e-12);
  CHECK(pred.variance[1] == doctest::Approx(1.0));
}

TEST_CASE("adding training points never raises predictive variance") {
  const MatrixXd x = oracle::uniform_points(3, 60, 8);
  const MatrixXd t = oracle::uniform_points(3, 4, 9);
  const auto p = aniso(3, 1e-3);
  const VectorXd y = gp_simulate(x, p, 3);
  VectorXd prev = VectorXd::Constant(4, 1e300);
  for (Index n : {5, 15, 30, 60}) {
    const auto pred = exact_predict(x.leftCols(n), y.head(n), t, p);
    CHECK((pred.variance.array() <= prev.array() + 1e-12).all());
    prev = pred.variance;
  }
}

TEST_CASE("variance clamp") {
  VectorXd v(3);
  v << -5e-11, 0.0, 2.0;
  clamp_variances(v);
  CHECK(v[0] == 0.0);
  v << -1e-9, 0.0, 1.0;
  CHECK_THROWS_AS(clamp_variances(v), NumericalError);
}

TEST_CASE("simulation is deterministic and has the right scale") {
  const MatrixXd x = oracle::uniform_points(2, 2000, 4);
  KernelParams p;
  p.beta = VectorXd::Constant(2, 0.05);
  std::vector<double> vars;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const VectorXd y = gp_simulate(x, p, seed);
    if (seed == 1) CHECK((gp_simulate(x, p, seed) - y).cwiseAbs().maxCoeff() == 0.0);
    const double mean = y.mean();
    vars.push_back((y.array() - mean).square().sum() / (y.size() - 1));
  }
  std::sort(vars.begin(), vars.end());
  CHECK(vars[2] > 0.8);
  CHECK(vars[2] < 1.2);
}

TEST_CASE("duplicated rows simulate equal values without a nugget") {
  MatrixXd x = oracle::uniform_points(2, 10, 6);
  x.col(3) = x.col(8);
  KernelParams p;
  p.beta = VectorXd::Constant(2, 0.3);
  p.tau2 = 0.0;
  const VectorXd y = gp_simulate(x, p, 12);
  CHECK(y[3] == y[8]);
}

TEST_CASE("oracle size limit") {
  CHECK_NOTHROW(check_exact_size(kExactOracleLimit));
  CHECK_THROWS_AS(check_exact_size(kExactOracleLimit + 1), UsageError);
}
