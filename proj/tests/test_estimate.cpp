#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "sbv/errors.hpp"
#include "sbv/estimate.hpp"
#include "sbv/exact_gp.hpp"
#include "sbv/optimize.hpp"

using namespace sbv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset simulated(const KernelParams& p, Index n, std::uint64_t seed) {
  const MatrixXd x = oracle::uniform_points(p.dim(), n, seed);
  return Dataset::from_points(x, gp_simulate(x, p, seed + 1));
}

VecchiaConfig sbv_config(Index bs, Index m) {
  VecchiaConfig c;
  c.bs_est = bs;
  c.bs_pred = bs;
  c.m_est = m;
  c.m_pred = m;
  return c;
}

KernelParams iso_theta(Index d, double beta) {
  KernelParams p;
  p.beta = VectorXd::Constant(d, beta);
  p.tau2 = 1e-4;
  p.nu = 2.5;
  return p;
}

}  // namespace

TEST_CASE("prediction error metrics") {
  VectorXd y(3);
  y << 1.0, 2.0, -1.0;
  CHECK(mspe(y, y) == 0.0);
  CHECK(rmspe(y, y) == 0.0);
  CHECK(mspe((y.array() + 0.3).matrix(), y) == doctest::Approx(0.09));
  VectorXd t(2), pr(2);
  t << 1.0, 1.0;
  pr << 1.1, 0.9;
  CHECK(rmspe(pr, t) == doctest::Approx(10.0).epsilon(1e-12));
  t[1] = 0.0;
  CHECK_THROWS_AS(rmspe(pr, t), UsageError);
  CHECK_THROWS_AS(mspe(pr, y), UsageError);
}

TEST_CASE("Nelder-Mead finds a bounded minimum and respects the budget") {
  const auto quad = [](const VectorXd& x) { return (x.array() - 0.3).square().sum(); };
  const VectorXd lo = VectorXd::Constant(3, -1.0), hi = VectorXd::Constant(3, 1.0);
  NelderMeadOptions o;
  o.max_evals = 2000;
  o.rel_tol = 1e-14;
  const auto r = minimize_nelder_mead(quad, VectorXd::Constant(3, -0.8), lo, hi, o);
  CHECK((r.x.array() - 0.3).abs().maxCoeff() < 1e-4);
  CHECK(r.converged);

  const auto edge = [](const VectorXd& x) { return -x.sum(); };
  const auto e = minimize_nelder_mead(edge, VectorXd::Zero(3), lo, hi, o);
  CHECK(e.x.isApprox(hi, 1e-6));
  CHECK((e.x.array() <= 1.0).all());

  int calls = 0;
  const auto counted = [&](const VectorXd& x) {
    ++calls;
    return quad(x);
  };
  o.max_evals = 17;
  const auto c = minimize_nelder_mead(counted, VectorXd::Zero(3), lo, hi, o);
  CHECK(calls == 17);
  CHECK(c.evals == 17);
}

TEST_CASE("Nelder-Mead rejects failed evaluations") {
  const auto f = [](const VectorXd& x) {
    if (x[0] > 0.5) return std::numeric_limits<double>::quiet_NaN();
    return (x[0] - 0.4) * (x[0] - 0.4) + x[1] * x[1];
  };
  NelderMeadOptions o;
  o.max_evals = 500;
  const auto r = minimize_nelder_mead(f, VectorXd::Zero(2), VectorXd::Constant(2, -2), VectorXd::Constant(2, 2), o);
  CHECK(std::isfinite(r.value));
  CHECK(r.x[0] <= 0.5);
}

TEST_CASE("fit from the truth never ends worse and stays in bounds") {
  KernelParams truth = iso_theta(2, 0.2);
  truth.beta[1] = 0.6;
  const Dataset data = simulated(truth, 400, 3);
  WorkerGroup g(2);
  FitOptions o;
  o.max_evals = 120;
  const auto bounds = default_bounds(data);
  const auto fit = mle_fit(data, sbv_config(10, 20), bounds, truth, o, g);
  REQUIRE(!fit.loglik_trace.empty());
  CHECK(fit.loglik >= fit.loglik_trace.front());
  CHECK(*std::max_element(fit.loglik_trace.begin(), fit.loglik_trace.end()) == fit.loglik);
  CHECK(bounds.contains(fit.theta_hat));
  CHECK(fit.iterations <= 120);
  CHECK(fit.iterations == static_cast<Index>(fit.loglik_trace.size()));
  CHECK(fit.relevance.isApprox(fit.theta_hat.beta.cwiseInverse()));
}

TEST_CASE("fits are deterministic and preprocess once") {
  const Dataset data = simulated(iso_theta(3, 0.3), 300, 5);
  const auto bounds = default_bounds(data);
  const auto init = default_init(data, 2.5);
  std::vector<std::uint64_t> prints;
  FitOptions o;
  o.max_evals = 60;
  o.on_evaluation = [&](const Preprocessed& pre, const KernelParams&, double) { prints.push_back(pre.fingerprint()); };
  WorkerGroup g(3);
  const auto a = mle_fit(data, sbv_config(5, 15), bounds, init, o, g);
  REQUIRE(prints.size() == 60);
  for (auto h : prints) CHECK(h == prints.front());
  CHECK(a.fingerprint == prints.front());
  o.on_evaluation = nullptr;
  WorkerGroup g2(3);
  const auto b = mle_fit(data, sbv_config(5, 15), bounds, init, o, g2);
  CHECK(a.loglik_trace == b.loglik_trace);
  CHECK(a.theta_hat.beta == b.theta_hat.beta);
}

TEST_CASE("refit rounds re-preprocess with the current beta") {
  const Dataset data = simulated(iso_theta(2, 0.3), 250, 6);
  FitOptions o;
  o.max_evals = 80;
  o.refit_rounds = 2;
  std::vector<std::uint64_t> prints;
  o.on_evaluation = [&](const Preprocessed& pre, const KernelParams&, double) { prints.push_back(pre.fingerprint()); };
  WorkerGroup g(1);
  const auto fit = mle_fit(data, sbv_config(5, 10), default_bounds(data), default_init(data, 2.5), o, g);
  CHECK(fit.iterations <= 80);
  CHECK(prints.size() == static_cast<std::size_t>(fit.iterations));
}

TEST_CASE("isotropic variants tie the range parameters") {
  KernelParams truth = iso_theta(3, 0.2);
  truth.beta[2] = 2.0;
  const Dataset data = simulated(truth, 300, 7);
  VecchiaConfig c = sbv_config(5, 15);
  c.variant = Variant::BV;
  FitOptions o;
  o.max_evals = 60;
  WorkerGroup g(1);
  const auto fit = mle_fit(data, c, default_bounds(data), truth, o, g);
  CHECK(fit.theta_hat.beta.isApproxToConstant(fit.theta_hat.beta[0], 1e-12));
}

TEST_CASE("invalid fit inputs") {
  const Dataset data = simulated(iso_theta(2, 0.3), 50, 8);
  FitOptions o;
  WorkerGroup g(1);
  auto init = default_init(data, 2.5);
  init.beta[0] = 1e4;
  CHECK_THROWS_AS(mle_fit(data, sbv_config(5, 10), default_bounds(data), init, o, g), UsageError);
  auto b = default_bounds(data);
  b.sigma2_lo = 0.0;
  CHECK_THROWS_AS(mle_fit(data, sbv_config(5, 10), b, default_init(data, 2.5), o, g), UsageError);
}

TEST_CASE("factorization failures during a fit are rejected, not fatal") {
  // Exact duplicates make every block singular once the nugget gets tiny.
  MatrixXd x = oracle::uniform_points(1, 60, 9);
  x.rightCols(30) = x.leftCols(30);
  KernelParams p = iso_theta(1, 0.3);
  const Dataset data = Dataset::from_points(x, gp_simulate(x, p, 3));
  auto b = default_bounds(data);
  b.tau2_lo = 1e-300;
  b.tau2_hi = 1e3;
  auto init = p;
  init.tau2 = 1e-20;
  FitOptions o;
  o.max_evals = 40;
  o.initial_step = 50.0;  // one simplex vertex lands on a usable nugget
  WorkerGroup g(1);
  const auto fit = mle_fit(data, sbv_config(4, 10), b, init, o, g);
  CHECK(std::isinf(fit.loglik_trace.front()));
  CHECK(std::isfinite(fit.loglik));
}

TEST_CASE("one-dimensional range recovery within a factor of two") {
  KernelParams truth;
  truth.beta = VectorXd::Constant(1, 0.05);
  truth.nu = 3.5;
  truth.tau2 = 1e-4;
  std::vector<double> ratio;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset data = simulated(truth, 2000, 100 + seed);
    auto init = default_init(data, 3.5);
    FitOptions o;
    o.max_evals = 250;
    WorkerGroup g(1);
    const auto fit = mle_fit(data, sbv_config(10, 60), default_bounds(data), init, o, g);
    ratio.push_back(fit.theta_hat.beta[0] / truth.beta[0]);
  }
  std::sort(ratio.begin(), ratio.end());
  CHECK(ratio[2] > 0.5);
  CHECK(ratio[2] < 2.0);
}

TEST_CASE("warm start on the full data equals a direct SV fit") {
  const Dataset data = simulated(iso_theta(2, 0.3), 200, 10);
  VecchiaConfig sv;
  sv.variant = Variant::SV;
  sv.bs_est = sv.bs_pred = 1;
  sv.m_est = 10;
  FitOptions o;
  o.max_evals = 50;
  const auto bounds = default_bounds(data);
  const auto init = default_init(data, 2.5);
  WorkerGroup g(1);
  const auto direct = mle_fit(data, sv, bounds, init, o, g);
  VecchiaConfig sbv = sbv_config(10, 10);
  const auto warm = warm_start_beta(data, data.size(), sbv, bounds, init, 99, o, g);
  CHECK(warm.beta == direct.theta_hat.beta);
  CHECK_THROWS_AS(warm_start_beta(data, data.size() + 1, sbv, bounds, init, 99, o, g), UsageError);
}

TEST_CASE("warm start on isotropic truth gives comparable ranges") {
  std::vector<double> spread;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset data = simulated(iso_theta(3, 0.3), 1500, 200 + seed);
    FitOptions o;
    o.max_evals = 200;
    WorkerGroup g(1);
    const auto b = warm_start_beta(data, 600, sbv_config(10, 30), default_bounds(data), default_init(data, 2.5),
                                   seed, o, g);
    spread.push_back(b.beta.maxCoeff() / b.beta.minCoeff());
  }
  std::sort(spread.begin(), spread.end());
  CHECK(spread[2] < 3.0);
}

TEST_CASE("KL divergence limits") {
  const MatrixXd x = oracle::uniform_points(3, 150, 11);
  KernelParams p = iso_theta(3, 0.4);
  WorkerGroup g(2);
  CHECK(std::abs(kl_divergence(x, p, sbv_config(10, 150), g)) < 1e-6);
  for (Index m : {1, 5, 20}) {
    CHECK(kl_divergence(x, p, sbv_config(10, m), g) >= -1e-6);
    VecchiaConfig cv;
    cv.variant = Variant::CV;
    cv.bs_est = cv.bs_pred = 1;
    cv.m_est = m;
    CHECK(kl_divergence(x, p, cv, g) >= -1e-6);
  }
}
