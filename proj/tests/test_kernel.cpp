#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sbv/errors.hpp"
#include "sbv/kernel.hpp"
#include "sbv/linalg.hpp"

using namespace sbv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

KernelParams params(double sigma2, VectorXd beta, double nu, double tau2) {
  KernelParams p;
  p.sigma2 = sigma2;
  p.beta = std::move(beta);
  p.nu = nu;
  p.tau2 = tau2;
  return p;
}

}  // namespace

TEST_CASE("scaled distance examples") {
  VectorXd x(1), x2(1), b(1);
  x << 0.1;
  x2 << 0.0;
  b << 0.05;
  CHECK(scaled_distance(x, x2, b) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(scaled_distance(x, x, b) == 0.0);

  VectorXd y(2), y2 = VectorXd::Zero(2), b2(2);
  y << 0.3, 0.4;
  b2 << 0.1, 0.2;
  CHECK(scaled_distance(y, y2, b2) == doctest::Approx(std::sqrt(13.0)).epsilon(1e-14));
  CHECK(scaled_distance(y, y2, b2) == scaled_distance(y2, y, b2));
  CHECK_THROWS_AS(scaled_distance(x, y, b2), UsageError);
}

TEST_CASE("matern at zero carries sigma2 plus nugget") {
  const auto p = params(1.0, VectorXd::Ones(1), 3.5, 0.25);
  CHECK(matern(0.0, p) == doctest::Approx(1.25));
  CHECK(matern(1e-300, p) < 1.0 + 1e-12);
  CHECK_THROWS_AS(matern(-1.0, p), UsageError);
}

TEST_CASE("closed forms agree with the Bessel quadrature") {
  for (double nu : {0.5, 1.5, 2.5, 3.5}) {
    for (double r : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 12.0}) {
      CAPTURE(nu);
      CAPTURE(r);
      CHECK(matern_correlation(r, nu) == doctest::Approx(oracle::matern(r, 1.0, nu)).epsilon(1e-10));
    }
  }
  CHECK(std::abs(matern_correlation(1.0, 3.5) - oracle::matern(1.0, 1.0, 3.5)) < 1e-10);
}

TEST_CASE("unsupported smoothness is rejected") {
  CHECK_FALSE(is_supported_smoothness(1.0));
  CHECK_THROWS_AS(matern_correlation(1.0, 1.0), UsageError);
  auto p = params(1.0, VectorXd::Ones(2), 2.0, 0.0);
  CHECK_THROWS_AS(p.validate(), UsageError);
  p.nu = 2.5;
  p.beta[1] = 0.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p.beta[1] = 1.0;
  p.tau2 = -1e-9;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p.tau2 = 0.0;
  CHECK_THROWS_AS(p.validate(3), UsageError);
}

TEST_CASE("matern decays and is nonincreasing on a grid") {
  for (double nu : {0.5, 1.5, 2.5, 3.5}) {
    double prev = matern_correlation(1e-6, nu);
    for (int i = 1; i <= 4000; ++i) {
      const double r = i * 0.01;
      const double v = matern_correlation(r, nu);
      CHECK(v <= prev);
      prev = v;
    }
    CHECK(matern_correlation(200.0, nu) < 1e-60);
  }
}

TEST_CASE("covariance matrix of a single point") {
  MatrixXd a(2, 1);
  a << 0.2, 0.7;
  const auto c = cov_matrix(a, params(1.0, VectorXd::Ones(2), 3.5, 0.0));
  REQUIRE(c.rows() == 1);
  CHECK(c(0, 0) == 1.0);
}

TEST_CASE("covariance matrix matches a double loop with the quadrature kernel") {
  MatrixXd a(1, 3);
  a << 0.0, 0.03, 0.1;
  const auto p = params(1.3, VectorXd::Constant(1, 0.05), 3.5, 0.01);
  const MatrixXd c = cov_matrix(a, p);
  const MatrixXd ref = oracle::covariance(a, a, p, true);
  CHECK((c - ref).cwiseAbs().maxCoeff() < 1e-10);
  const MatrixXd x = cross_cov_matrix(a, a, p);
  CHECK((x - oracle::covariance(a, a, p, false)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(x(0, 0) == doctest::Approx(1.3));
}

TEST_CASE("same-set matrices are exactly symmetric and positive definite") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index d = 1 + static_cast<Index>(seed % 5);
    const Index n = 20 + static_cast<Index>(seed * 9);
    const MatrixXd a = oracle::uniform_points(d, n, seed);
    VectorXd beta = VectorXd::Constant(d, 0.3);
    beta[0] = 0.05;
    const auto p = params(1.0, beta, 3.5, 1e-8);
    MatrixXd c = cov_matrix(a, p);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.diagonal().isApproxToConstant(1.0 + 1e-8));
    const MatrixXd via_two = cov_matrix(a, a, p);
    CHECK((via_two - c).cwiseAbs().maxCoeff() == 0.0);
    CHECK_NOTHROW(cholesky_in_place(c, "psd check"));
  }
}

TEST_CASE("coincident distinct points get the nugget only on the diagonal") {
  MatrixXd a(1, 2);
  a << 0.5, 0.5;
  const auto p = params(1.0, VectorXd::Ones(1), 1.5, 0.5);
  const MatrixXd c = cov_matrix(a, p);
  CHECK(c(0, 0) == 1.5);
  CHECK(c(0, 1) == 1.0);
}

TEST_CASE("scaled kernel equals isotropic kernel on pre-divided inputs") {
  const MatrixXd a = oracle::uniform_points(4, 30, 7);
  VectorXd beta(4);
  beta << 0.05, 0.2, 1.0, 3.0;
  const auto aniso = params(2.0, beta, 2.5, 0.0);
  const auto iso = params(2.0, VectorXd::Ones(4), 2.5, 0.0);
  const MatrixXd scaled = beta.cwiseInverse().asDiagonal() * a;
  const MatrixXd c1 = cov_matrix(a, aniso);
  const MatrixXd c2 = cov_matrix(scaled, iso);
  CHECK((c1 - c2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("dimension mismatch in matrix construction") {
  const MatrixXd a = oracle::uniform_points(3, 4, 1);
  CHECK_THROWS_AS(cov_matrix(a, params(1.0, VectorXd::Ones(2), 0.5, 0.0)), UsageError);
  const MatrixXd b = oracle::uniform_points(2, 4, 1);
  CHECK_THROWS_AS(cross_cov_matrix(a, b, params(1.0, VectorXd::Ones(3), 0.5, 0.0)), UsageError);
}
