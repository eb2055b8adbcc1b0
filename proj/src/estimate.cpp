#include "sbv/estimate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "sbv/errors.hpp"
#include "sbv/exact_gp.hpp"
#include "sbv/optimize.hpp"
#include "sbv/rng.hpp"

namespace sbv {

namespace {

double response_variance(const Dataset& data) {
  if (data.size() < 2) return 1.0;
  const double mean = data.responses.mean();
  const double v = (data.responses.array() - mean).square().sum() / static_cast<double>(data.size() - 1);
  return v > 0.0 && std::isfinite(v) ? v : 1.0;
}

// Parameter vector layout: [log sigma2, log beta (1 or d entries), log tau2].
struct Packing {
  Index d = 0;
  bool tied = false;

  [[nodiscard]] Index beta_count() const { return tied ? 1 : d; }
  [[nodiscard]] Index size() const { return beta_count() + 2; }

  [[nodiscard]] Eigen::VectorXd pack(const KernelParams& p) const {
    Eigen::VectorXd x(size());
    x[0] = std::log(p.sigma2);
    if (tied)
      x[1] = p.beta.array().log().mean();
    else
      x.segment(1, d) = p.beta.array().log().matrix();
    x[size() - 1] = std::log(p.tau2);
    return x;
  }

  [[nodiscard]] KernelParams unpack(const Eigen::VectorXd& x, double nu) const {
    KernelParams p;
    p.nu = nu;
    p.sigma2 = std::exp(x[0]);
    p.beta = tied ? Eigen::VectorXd::Constant(d, std::exp(x[1]))
                  : Eigen::VectorXd(x.segment(1, d).array().exp().matrix());
    p.tau2 = std::exp(x[size() - 1]);
    return p;
  }

  [[nodiscard]] std::pair<Eigen::VectorXd, Eigen::VectorXd> box(const ParamBounds& b) const {
    Eigen::VectorXd lo(size()), hi(size());
    lo[0] = std::log(b.sigma2_lo);
    hi[0] = std::log(b.sigma2_hi);
    if (tied) {
      lo[1] = std::log(b.beta_lo.maxCoeff());
      hi[1] = std::log(b.beta_hi.minCoeff());
    } else {
      lo.segment(1, d) = b.beta_lo.array().log().matrix();
      hi.segment(1, d) = b.beta_hi.array().log().matrix();
    }
    lo[size() - 1] = std::log(b.tau2_lo);
    hi[size() - 1] = std::log(b.tau2_hi);
    return {lo, hi};
  }
};

}  // namespace

void ParamBounds::validate(Index d) const {
  if (!(sigma2_lo > 0.0) || !(tau2_lo > 0.0)) throw UsageError("bounds: lower bounds must be positive");
  if (sigma2_lo > sigma2_hi || tau2_lo > tau2_hi) throw UsageError("bounds: lower bound exceeds upper bound");
  if (beta_lo.size() != d || beta_hi.size() != d) throw UsageError("bounds: beta bounds must have one entry per dimension");
  if ((beta_lo.array() <= 0.0).any()) throw UsageError("bounds: beta lower bounds must be positive");
  if ((beta_lo.array() > beta_hi.array()).any()) throw UsageError("bounds: beta lower bound exceeds upper bound");
}

bool ParamBounds::contains(const KernelParams& p) const {
  if (p.beta.size() != beta_lo.size()) return false;
  return p.sigma2 >= sigma2_lo && p.sigma2 <= sigma2_hi && p.tau2 >= tau2_lo && p.tau2 <= tau2_hi &&
         (p.beta.array() >= beta_lo.array()).all() && (p.beta.array() <= beta_hi.array()).all();
}

ParamBounds default_bounds(const Dataset& data) {
  const double v = response_variance(data);
  ParamBounds b;
  b.sigma2_lo = 1e-3 * v;
  b.sigma2_hi = 1e3 * v;
  b.beta_lo = Eigen::VectorXd::Constant(data.dim(), 1e-3);
  b.beta_hi = Eigen::VectorXd::Constant(data.dim(), 1e2);
  b.tau2_lo = 1e-8;
  b.tau2_hi = std::max(10.0 * v, 1e-8);
  return b;
}

KernelParams default_init(const Dataset& data, double nu) {
  const double v = response_variance(data);
  KernelParams p;
  p.sigma2 = v;
  p.beta = Eigen::VectorXd::Constant(data.dim(), 0.25);
  p.nu = nu;
  p.tau2 = std::max(1e-4 * v, 1e-8);
  return p;
}

FitResult mle_fit(const Dataset& data, const VecchiaConfig& config, const ParamBounds& bounds,
                  const KernelParams& init, const FitOptions& options, WorkerGroup& group) {
  const auto start = std::chrono::steady_clock::now();
  data.validate();
  config.validate();
  init.validate(data.dim());
  bounds.validate(data.dim());
  if (!bounds.contains(init)) throw UsageError("mle_fit: init lies outside the bounds");
  if (options.max_evals < 1) throw UsageError("mle_fit: max_evals must be positive");
  if (options.refit_rounds < 1) throw UsageError("mle_fit: refit rounds must be at least 1");

  const Packing packing{data.dim(), !uses_scaling(config.variant)};
  const auto [lo, hi] = packing.box(bounds);

  FitResult out;
  KernelParams current = init;
  if (packing.tied) current = packing.unpack(packing.pack(init).cwiseMax(lo).cwiseMin(hi), init.nu);
  Preprocessed pre;
  Index budget = options.max_evals;
  double best = -std::numeric_limits<double>::infinity();

  for (int round = 0; round < options.refit_rounds && budget > 0; ++round) {
    pre = preprocess(data, config, geometry_beta(config.variant, current), group);
    auto objective = [&](const Eigen::VectorXd& x) {
      const KernelParams p = packing.unpack(x, init.nu);
      double ll = -std::numeric_limits<double>::infinity();
      try {
        ll = vecchia_loglik(data, pre, p, group);
      } catch (const NumericalError&) {
      }
      if (!std::isfinite(ll)) ll = -std::numeric_limits<double>::infinity();
      out.loglik_trace.push_back(ll);
      if (options.on_evaluation) options.on_evaluation(pre, p, ll);
      return -ll;
    };
    NelderMeadOptions nm;
    nm.max_evals = budget;
    nm.rel_tol = options.rel_tol;
    nm.initial_step = options.initial_step;
    const NelderMeadResult r = minimize_nelder_mead(objective, packing.pack(current), lo, hi, nm);
    budget -= r.evals;
    out.converged = r.converged;
    if (-r.value >= best || round == 0) {
      best = -r.value;
      current = packing.unpack(r.x, init.nu);
    }
  }

  out.theta_hat = current;
  // exp(log(x)) can land one ulp outside the box.
  out.theta_hat.sigma2 = std::clamp(out.theta_hat.sigma2, bounds.sigma2_lo, bounds.sigma2_hi);
  out.theta_hat.tau2 = std::clamp(out.theta_hat.tau2, bounds.tau2_lo, bounds.tau2_hi);
  out.theta_hat.beta = out.theta_hat.beta.cwiseMax(bounds.beta_lo).cwiseMin(bounds.beta_hi);
  out.relevance = out.theta_hat.relevance();
  out.iterations = static_cast<Index>(out.loglik_trace.size());
  out.loglik = best;
  out.fingerprint = pre.fingerprint();
  out.nns_stats = pre.nns_stats;
  out.imbalance = pre.layout.assignment.imbalance();
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

KernelParams warm_start_beta(const Dataset& data, Index subsample_size, const VecchiaConfig& config,
                             const ParamBounds& bounds, const KernelParams& init, std::uint64_t seed,
                             const FitOptions& options, WorkerGroup& group) {
  if (subsample_size < 1 || subsample_size > data.size())
    throw UsageError("warm_start_beta: subsample size must lie in [1, n]");
  Rng rng(seed);
  const auto drawn = rng.sample_without_replacement(static_cast<std::size_t>(data.size()),
                                                   static_cast<std::size_t>(subsample_size));
  std::vector<Index> rows(drawn.begin(), drawn.end());
  std::sort(rows.begin(), rows.end());
  const Dataset sub = data.subset(rows);
  VecchiaConfig sv = config;
  sv.variant = Variant::SV;
  sv.bs_est = 1;
  sv.bs_pred = 1;
  return mle_fit(sub, sv, bounds, init, options, group).theta_hat;
}

double kl_divergence(PointsRef X, const KernelParams& params, const VecchiaConfig& config, WorkerGroup& group) {
  check_exact_size(X.cols());
  const Dataset zero = Dataset::from_points(X, Eigen::VectorXd::Zero(X.cols()));
  const double exact = exact_loglik(zero.points, zero.responses, params);
  const double approx = vecchia_loglik(zero, config, params, group);
  return exact - approx;
}

double mspe(VectorRef predictions, VectorRef truth) {
  if (predictions.size() != truth.size()) throw UsageError("mspe: length mismatch");
  if (truth.size() == 0) throw UsageError("mspe: empty input");
  return (predictions - truth).squaredNorm() / static_cast<double>(truth.size());
}

double rmspe(VectorRef predictions, VectorRef truth) {
  if (predictions.size() != truth.size()) throw UsageError("rmspe: length mismatch");
  if (truth.size() == 0) throw UsageError("rmspe: empty input");
  if ((truth.array() == 0.0).any()) throw UsageError("rmspe: truth contains a zero entry");
  const double mean_sq = ((predictions - truth).array() / truth.array()).square().mean();
  return 100.0 * std::sqrt(mean_sq);
}

}  // namespace sbv
