#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sbv/errors.hpp"
#include "sbv/exact_gp.hpp"
#include "sbv/vecchia.hpp"

using namespace sbv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

KernelParams design_theta() {
  KernelParams p;
  p.sigma2 = 1.0;
  p.beta = VectorXd::Constant(10, 5.0);
  p.beta[0] = 0.05;
  p.beta[1] = 0.05;
  p.nu = 3.5;
  p.tau2 = 0.0;
  return p;
}

KernelParams random_theta(Index d, std::uint64_t seed) {
  const MatrixXd u = oracle::uniform_points(d + 2, 1, seed);
  KernelParams p;
  p.sigma2 = 0.5 + u(0, 0);
  p.beta = (0.1 + 0.9 * u.col(0).tail(d).array()).matrix();
  p.nu = 2.5;
  p.tau2 = 1e-3 * (1.0 + u(1, 0));
  return p;
}

Dataset simulated(Index d, Index n, const KernelParams& p, std::uint64_t seed) {
  const MatrixXd x = oracle::uniform_points(d, n, seed);
  return Dataset::from_points(x, gp_simulate(x, p, seed + 1));
}

VecchiaConfig cfg(Variant v, Index bs, Index m) {
  VecchiaConfig c;
  c.variant = v;
  c.bs_est = uses_blocks(v) ? bs : 1;
  c.bs_pred = c.bs_est;
  c.m_est = m;
  c.m_pred = m;
  return c;
}

}  // namespace

TEST_CASE("config invariants") {
  VecchiaConfig c;
  c.variant = Variant::CV;
  c.bs_est = 10;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.bs_est = 1;
  c.bs_pred = 1;
  CHECK_NOTHROW(c.validate());
  c.n_sim = 1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.n_sim = 10;
  c.ci_level = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  CHECK(parse_variant("SBV") == Variant::SBV);
  CHECK_THROWS_AS(parse_variant("sbv2"), UsageError);
  CHECK(to_string(Variant::BV) == "BV");
}

TEST_CASE("geometry per variant") {
  const auto p = design_theta();
  CHECK(geometry_beta(Variant::CV, p) == VectorXd::Ones(10));
  CHECK(geometry_beta(Variant::BV, p) == VectorXd::Ones(10));
  CHECK(geometry_beta(Variant::SV, p) == p.beta);
  CHECK(geometry_beta(Variant::SBV, p) == p.beta);
}

TEST_CASE("unconditional scalar block") {
  BlockBatchEntry e;
  e.lk = MatrixXd::Ones(1, 1);
  e.y_block = VectorXd::Zero(1);
  CHECK(block_loglik(e) == doctest::Approx(-0.5 * std::log(2 * M_PI)).epsilon(1e-15));
}

TEST_CASE("batch entries are kernel submatrices") {
  const auto p = random_theta(3, 1);
  const Dataset data = simulated(3, 60, p, 2);
  WorkerGroup g(1);
  auto c = cfg(Variant::SBV, 6, 8);
  const auto pre = preprocess(data, c, geometry_beta(c.variant, p), g);
  const auto& part = pre.layout.partition;
  std::vector<Index> all(static_cast<std::size_t>(part.block_count()));
  std::iota(all.begin(), all.end(), Index{0});
  const auto batch = assemble_batches(data, part, pre.neighbors, p, all);
  const MatrixXd k = oracle::covariance(data.points, data.points, p, true);
  for (const auto& e : batch) {
    const auto& mem = part.blocks[e.block];
    const auto& nb = pre.neighbors.sets[e.block];
    REQUIRE(e.cross.rows() == static_cast<Index>(nb.size()));
    REQUIRE(e.cross.cols() == static_cast<Index>(mem.size()));
    for (std::size_t i = 0; i < mem.size(); ++i) {
      CHECK(e.y_block[i] == data.responses[mem[i]]);
      for (std::size_t j = 0; j < mem.size(); ++j) CHECK(std::abs(e.lk(i, j) - k(mem[i], mem[j])) < 1e-10);
      for (std::size_t j = 0; j < nb.size(); ++j) CHECK(std::abs(e.cross(j, i) - k(nb[j], mem[i])) < 1e-10);
    }
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = 0; j < nb.size(); ++j) CHECK(std::abs(e.con(i, j) - k(nb[i], nb[j])) < 1e-10);
  }
  const auto& first = batch[static_cast<std::size_t>(part.order[0])];
  CHECK(first.con.size() == 0);
  CHECK(first.cross.size() == 0);
}

TEST_CASE("block terms equal the dense conditional oracle") {
  const auto p = random_theta(2, 3);
  const Dataset data = simulated(2, 40, p, 4);
  WorkerGroup g(1);
  auto c = cfg(Variant::SBV, 5, 10);
  const auto pre = preprocess(data, c, geometry_beta(c.variant, p), g);
  std::vector<double> terms;
  const double total = vecchia_loglik(data, pre, p, g, &terms);
  const MatrixXd k = oracle::covariance(data.points, data.points, p, true);
  double sum = 0.0;
  for (Index b = 0; b < pre.layout.partition.block_count(); ++b) {
    const auto& mem = pre.layout.partition.blocks[b];
    const auto cond = oracle::condition(k, data.responses, mem, pre.neighbors.sets[b]);
    VectorXd yb(static_cast<Index>(mem.size()));
    for (std::size_t i = 0; i < mem.size(); ++i) yb[i] = data.responses[mem[i]];
    const double ref = oracle::gaussian_logpdf(yb, cond.mean, cond.cov);
    CHECK(terms[b] == doctest::Approx(ref).epsilon(1e-8));
    sum += ref;
  }
  CHECK(total == doctest::Approx(sum).epsilon(1e-9));
}

TEST_CASE("full conditioning recovers the exact likelihood") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Index d = 1 + static_cast<Index>(seed % 4);
    const auto p = random_theta(d, seed);
    const Dataset data = simulated(d, 250, p, seed * 7);
    const double exact = exact_loglik(data.points, data.responses, p);
    for (Index bs : {1, 4, 25}) {
      for (Variant v : {Variant::CV, Variant::BV, Variant::SV, Variant::SBV}) {
        auto c = cfg(v, bs, 300);
        c.cluster_seed = seed;
        c.order_seed = seed + 11;
        WorkerGroup g(1 + static_cast<int>(seed % 3));
        const double approx = vecchia_loglik(data, c, p, g);
        CHECK(std::abs(approx - exact) <= 1e-8 * std::abs(exact));
      }
    }
  }
}

TEST_CASE("a single block is the exact likelihood") {
  const auto p = random_theta(3, 5);
  const Dataset data = simulated(3, 90, p, 6);
  auto c = cfg(Variant::SBV, 90, 0);
  WorkerGroup g(1);
  const auto pre = preprocess(data, c, p.beta, g);
  REQUIRE(pre.layout.partition.block_count() == 1);
  const double exact = exact_loglik(data.points, data.responses, p);
  CHECK(std::abs(vecchia_loglik(data, pre, p, g) - exact) <= 1e-10 * std::abs(exact));
}

TEST_CASE("conditioning on every earlier point telescopes to the exact likelihood") {
  const auto p = random_theta(2, 8);
  const Dataset data = simulated(2, 120, p, 9);
  auto c = cfg(Variant::BV, 7, 1);
  WorkerGroup g(2);
  auto pre = preprocess(data, c, VectorXd::Ones(2), g);
  // Replace the nearest-neighbor sets by the union of earlier blocks, in reverse order.
  std::vector<Index> earlier;
  for (Index b : pre.layout.partition.order) {
    pre.neighbors.sets[b].assign(earlier.rbegin(), earlier.rend());
    const auto& mem = pre.layout.partition.blocks[b];
    earlier.insert(earlier.end(), mem.begin(), mem.end());
  }
  const double exact = exact_loglik(data.points, data.responses, p);
  CHECK(std::abs(vecchia_loglik(data, pre, p, g) - exact) <= 1e-9 * std::abs(exact));
}

TEST_CASE("KL is nonnegative and shrinks with m on the anisotropic design") {
  const auto p = design_theta();
  const MatrixXd x = oracle::uniform_points(10, 2000, 42);
  const Dataset zero = Dataset::from_points(x, VectorXd::Zero(2000));
  const double exact = exact_loglik(zero.points, zero.responses, p);
  double prev = std::numeric_limits<double>::infinity();
  for (Index m : {10, 30, 60}) {
    WorkerGroup g(2);
    const double kl = exact - vecchia_loglik(zero, cfg(Variant::SBV, 10, m), p, g);
    CHECK(kl >= -1e-6);
    CHECK(kl < prev);
    prev = kl;
  }
}

TEST_CASE("likelihood is bit-identical across worker counts") {
  const auto p = random_theta(4, 12);
  const Dataset data = simulated(4, 1500, p, 13);
  auto c = cfg(Variant::SBV, 10, 30);
  WorkerGroup g4(4);
  const auto pre = preprocess(data, c, p.beta, g4);
  std::vector<double> values;
  for (int P : {1, 2, 4, 3}) {
    WorkerGroup g(P);
    values.push_back(vecchia_loglik(data, pre, p, g));
  }
  for (double v : values) CHECK(v == values[0]);
  WorkerGroup again(4);
  CHECK(vecchia_loglik(data, pre, p, again) == values[0]);
}

TEST_CASE("variant degeneracies share one code path") {
  const auto p = random_theta(3, 14);
  const Dataset data = simulated(3, 600, p, 15);
  WorkerGroup g(2);
  auto sbv1 = cfg(Variant::SBV, 1, 20);
  auto sv = cfg(Variant::SV, 1, 20);
  CHECK(vecchia_loglik(data, sbv1, p, g) == vecchia_loglik(data, sv, p, g));
  CHECK(preprocess(data, sbv1, p.beta, g).fingerprint() == preprocess(data, sv, p.beta, g).fingerprint());

  auto iso = p;
  iso.beta = VectorXd::Constant(3, 0.5);
  auto sbv = cfg(Variant::SBV, 8, 20);
  auto bv = cfg(Variant::BV, 8, 20);
  CHECK(vecchia_loglik(data, sbv, iso, g) == vecchia_loglik(data, bv, iso, g));
}

TEST_CASE("chunk size does not change the value") {
  const auto p = random_theta(2, 16);
  const Dataset data = simulated(2, 500, p, 17);
  auto c = cfg(Variant::SBV, 5, 15);
  WorkerGroup g(1);
  auto pre = preprocess(data, c, p.beta, g);
  const double a = vecchia_loglik(data, pre, p, g);
  pre.chunk_blocks = 1;
  CHECK(vecchia_loglik(data, pre, p, g) == a);
  pre.chunk_blocks = 100000;
  CHECK(vecchia_loglik(data, pre, p, g) == a);
}

TEST_CASE("a failing block factorization names the block and stage") {
  MatrixXd x(1, 4);
  x << 0.1, 0.1, 0.5, 0.9;
  KernelParams p;
  p.beta = VectorXd::Ones(1);
  p.tau2 = 0.0;
  const Dataset data = Dataset::from_points(x, VectorXd::Zero(4));
  auto c = cfg(Variant::BV, 4, 0);
  WorkerGroup g(1);
  try {
    (void)vecchia_loglik(data, c, p, g);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("block stage") != std::string::npos);
  }
}

TEST_CASE("prediction with full conditioning matches the exact predictor") {
  const auto p = random_theta(2, 18);
  const Dataset data = simulated(2, 150, p, 19);
  const MatrixXd t = oracle::uniform_points(2, 40, 20);
  const auto ref = exact_predict(data.points, data.responses, t, p);
  for (Variant v : {Variant::CV, Variant::SBV}) {
    auto c = cfg(v, 4, 150);
    WorkerGroup g(2);
    const auto got = vecchia_predict(data, t, c, p, g);
    for (Index i = 0; i < 40; ++i) {
      CHECK(got.mean[i] == doctest::Approx(ref.mean[i]).epsilon(1e-8).scale(1.0));
      CHECK(got.variance[i] == doctest::Approx(ref.variance[i]).epsilon(1e-8).scale(1.0));
    }
  }
}

TEST_CASE("prediction interpolates a training point without nugget") {
  KernelParams p;
  p.beta = VectorXd::Constant(2, 0.3);
  p.tau2 = 0.0;
  p.nu = 1.5;
  const Dataset data = simulated(2, 80, p, 21);
  MatrixXd t(2, 1);
  t.col(0) = data.points.col(17);
  WorkerGroup g(1);
  const auto got = vecchia_predict(data, t, cfg(Variant::SV, 1, 10), p, g);
  CHECK(got.mean[0] == doctest::Approx(data.responses[17]).epsilon(1e-8));
  CHECK(std::abs(got.variance[0]) < 1e-8);
}

TEST_CASE("prediction rejects a dimension mismatch") {
  const auto p = random_theta(2, 22);
  const Dataset data = simulated(2, 30, p, 23);
  WorkerGroup g(1);
  CHECK_THROWS_AS(vecchia_predict(data, MatrixXd::Zero(3, 2), cfg(Variant::SBV, 2, 5), p, g), UsageError);
}

TEST_CASE("normal quantile and conditional simulation") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  VectorXd mean(2), var(2);
  mean << 1.5, -2.0;
  var << 0.0, 4.0;
  const auto s = conditional_simulate(mean, var, 100000, 7, 0.95);
  CHECK(s.mean[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(s.sd[0] < 1e-12);
  CHECK(s.ci_hi[0] - s.ci_lo[0] < 1e-11);
  // Monte-Carlo bounds: sd of the mean is 2/sqrt(1e5), sd of s^2 about 4 sqrt(2/1e5).
  CHECK(std::abs(s.mean[1] + 2.0) < 3 * 2.0 / std::sqrt(1e5));
  CHECK(std::abs(s.sd[1] * s.sd[1] - 4.0) < 3 * 4.0 * std::sqrt(2.0 / 1e5));
  CHECK((s.ci_hi[1] - s.mean[1]) == doctest::Approx(normal_quantile(0.975) * s.sd[1]));
  var[1] = -1.0;
  CHECK_THROWS_AS(conditional_simulate(mean, var, 10, 1, 0.95), UsageError);
  var[1] = 1.0;
  const auto a = conditional_simulate(mean, var, 50, 3, 0.9);
  const auto b = conditional_simulate(mean, var, 50, 3, 0.9);
  CHECK(a.ci_lo == b.ci_lo);
}
