#include "sbv/vecchia.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "sbv/errors.hpp"
#include "sbv/exact_gp.hpp"
#include "sbv/linalg.hpp"
#include "sbv/rng.hpp"

namespace sbv {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
};

Index effective_block_size(Variant v, Index bs) { return uses_blocks(v) ? bs : 1; }

// Conditional update shared by likelihood and prediction. On return
// entry.lk holds the conditional covariance (lower triangle valid) and the
// returned vector is the conditional mean.
Eigen::VectorXd condition(BlockBatchEntry& entry) {
  const Index m = entry.con.rows();
  if (m == 0) return Eigen::VectorXd::Zero(entry.lk.rows());
  cholesky_in_place(entry.con, "block " + std::to_string(entry.block) + " conditioning stage");
  forward_solve_in_place(entry.con, entry.cross);
  forward_solve_in_place(entry.con, entry.y_cond);
  entry.lk.selfadjointView<Eigen::Lower>().rankUpdate(entry.cross.transpose(), -1.0);
  return entry.cross.transpose() * entry.y_cond;
}

}  // namespace

Variant parse_variant(const std::string& text) {
  if (text == "CV") return Variant::CV;
  if (text == "BV") return Variant::BV;
  if (text == "SV") return Variant::SV;
  if (text == "SBV") return Variant::SBV;
  throw UsageError("variant must be one of CV, BV, SV, SBV; got '" + text + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::CV:
      return "CV";
    case Variant::BV:
      return "BV";
    case Variant::SV:
      return "SV";
    default:
      return "SBV";
  }
}

bool uses_scaling(Variant v) { return v == Variant::SV || v == Variant::SBV; }
bool uses_blocks(Variant v) { return v == Variant::BV || v == Variant::SBV; }

void VecchiaConfig::validate() const {
  if (bs_est < 1 || bs_pred < 1) throw UsageError("block sizes must be at least 1");
  if (!uses_blocks(variant) && (bs_est != 1 || bs_pred != 1)) {
    throw UsageError("variant " + to_string(variant) + " conditions single points; bs_est and bs_pred must be 1");
  }
  if (m_est < 0 || m_pred < 0) throw UsageError("neighbor counts must be nonnegative");
  if (!(alpha > 0.0)) throw UsageError("alpha must be positive");
  if (n_sim < 2) throw UsageError("n_sim must be at least 2");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw UsageError("ci_level must lie in (0, 1)");
  if (chunk_blocks < 1) throw UsageError("chunk_blocks must be at least 1");
}

std::uint64_t Preprocessed::fingerprint() const {
  Fnv f;
  const auto& part = layout.partition;
  f.add(part.blocks.size());
  for (const auto& b : part.blocks) {
    f.add(b.size());
    for (Index i : b) f.add(static_cast<std::uint64_t>(i));
  }
  for (Index b : part.order) f.add(static_cast<std::uint64_t>(b));
  for (int w : part.owner) f.add(static_cast<std::uint64_t>(w));
  for (const auto& s : neighbors.sets) {
    f.add(s.size());
    for (Index i : s) f.add(static_cast<std::uint64_t>(i));
  }
  return f.h;
}

Eigen::VectorXd geometry_beta(Variant v, const KernelParams& params) {
  if (uses_scaling(v)) return params.beta;
  return Eigen::VectorXd::Ones(params.beta.size());
}

Preprocessed preprocess(const Dataset& data, const VecchiaConfig& config, VectorRef geometry_beta,
                        WorkerGroup& group, const Clusterer& clusterer) {
  config.validate();
  if (geometry_beta.size() != data.dim()) throw UsageError("preprocess: geometry beta length mismatch");
  Preprocessed pre;
  pre.geometry_beta = geometry_beta;
  pre.chunk_blocks = config.chunk_blocks;
  pre.layout = build_partition(data.points, geometry_beta, effective_block_size(config.variant, config.bs_est),
                               config.cluster_seed, config.order_seed, group, clusterer);
  pre.neighbors = filtered_knn_all(pre.layout.scaled, data.global_ids, pre.layout.partition, config.m_est,
                                   config.alpha, group, &pre.nns_stats);
  return pre;
}

std::vector<BlockBatchEntry> assemble_batches(const Dataset& data, const BlockPartition& partition,
                                              const NeighborSets& neighbors, const KernelParams& params,
                                              std::span<const Index> blocks) {
  std::vector<BlockBatchEntry> out;
  out.reserve(blocks.size());
  for (Index b : blocks) {
    const auto& members = partition.blocks[static_cast<std::size_t>(b)];
    const auto& nbrs = neighbors.sets[static_cast<std::size_t>(b)];
    const Eigen::MatrixXd block_pts = gather_points(data.points, members);
    const Eigen::MatrixXd nbr_pts = gather_points(data.points, nbrs);
    BlockBatchEntry e;
    e.block = b;
    e.lk = cov_matrix(block_pts, params);
    e.con = cov_matrix(nbr_pts, params);
    e.cross = cross_cov_matrix(nbr_pts, block_pts, params);
    e.y_block.resize(static_cast<Index>(members.size()));
    for (std::size_t k = 0; k < members.size(); ++k) e.y_block[static_cast<Index>(k)] = data.responses[members[k]];
    e.y_cond.resize(static_cast<Index>(nbrs.size()));
    for (std::size_t k = 0; k < nbrs.size(); ++k) e.y_cond[static_cast<Index>(k)] = data.responses[nbrs[k]];
    out.push_back(std::move(e));
  }
  return out;
}

double block_loglik(BlockBatchEntry entry) {
  const Eigen::VectorXd mu = condition(entry);
  cholesky_in_place(entry.lk, "block " + std::to_string(entry.block) + " block stage");
  Eigen::VectorXd v = entry.y_block - mu;
  forward_solve_in_place(entry.lk, v);
  const auto bs = static_cast<double>(entry.lk.rows());
  return -0.5 * (v.squaredNorm() + log_det_from_cholesky(entry.lk) + bs * kLog2Pi);
}

BlockConditional block_conditional(BlockBatchEntry entry) {
  BlockConditional out;
  out.mean = condition(entry);
  out.variance = entry.lk.diagonal();
  return out;
}

double vecchia_loglik(const Dataset& data, const Preprocessed& pre, const KernelParams& params,
                      WorkerGroup& group, std::vector<double>* per_block) {
  params.validate(data.dim());
  const auto& part = pre.layout.partition;
  const auto rank = part.ranks();
  const Index chunk = std::max<Index>(1, pre.chunk_blocks);

  struct Term {
    Index rank;
    double value;
  };
  std::vector<std::vector<Term>> terms(static_cast<std::size_t>(group.size()));
  std::vector<std::vector<Index>> owned(static_cast<std::size_t>(group.size()));
  // A partition built for a different worker count is folded onto this group.
  for (Index b : part.order)
    owned[static_cast<std::size_t>(part.owner[static_cast<std::size_t>(b)] % group.size())].push_back(b);

  for (int w = 0; w < group.size(); ++w) {
    const auto& mine = owned[static_cast<std::size_t>(w)];
    auto& out = terms[static_cast<std::size_t>(w)];
    out.reserve(mine.size());
    for (std::size_t start = 0; start < mine.size(); start += static_cast<std::size_t>(chunk)) {
      const std::size_t stop = std::min(mine.size(), start + static_cast<std::size_t>(chunk));
      std::span<const Index> ids(mine.data() + start, stop - start);
      auto batch = assemble_batches(data, part, pre.neighbors, params, ids);
      for (auto& entry : batch) {
        const Index b = entry.block;
        out.push_back({rank[static_cast<std::size_t>(b)], block_loglik(std::move(entry))});
      }
    }
  }

  const auto gathered = group.all_gather_concat(terms);
  // Each rank holds the same replica; rank 0's is used here.
  std::vector<double> by_rank(part.order.size(), 0.0);
  for (const auto& t : gathered.front()) by_rank[static_cast<std::size_t>(t.rank)] = t.value;
  double total = 0.0;
  for (double v : by_rank) total += v;
  if (per_block) {
    per_block->assign(part.order.size(), 0.0);
    for (std::size_t k = 0; k < part.order.size(); ++k) (*per_block)[static_cast<std::size_t>(part.order[k])] = by_rank[k];
  }
  return total;
}

double vecchia_loglik(const Dataset& data, const VecchiaConfig& config, const KernelParams& params,
                      WorkerGroup& group) {
  params.validate(data.dim());
  const auto pre = preprocess(data, config, geometry_beta(config.variant, params), group);
  return vecchia_loglik(data, pre, params, group);
}

VecchiaPrediction vecchia_predict(const Dataset& train, PointsRef targets, const VecchiaConfig& config,
                                  const KernelParams& params, WorkerGroup& group) {
  config.validate();
  params.validate(train.dim());
  if (targets.rows() != train.dim()) {
    throw UsageError("prediction inputs have dimension " + std::to_string(targets.rows()) +
                     " but training data has " + std::to_string(train.dim()));
  }
  const Eigen::VectorXd geo = geometry_beta(config.variant, params);
  const auto train_layout = build_partition(train.points, geo, effective_block_size(config.variant, config.bs_est),
                                            config.cluster_seed, config.order_seed, group);

  // Test points may sit slightly outside the training unit cube; clamp only
  // for worker assignment.
  const Eigen::MatrixXd clamped = targets.cwiseMax(0.0).cwiseMin(1.0);
  const auto assignment = distribute_points(clamped, relevant_dim(geo), group);
  const Eigen::MatrixXd test_scaled = scale_points(targets, geo);
  std::vector<BlockPartition> locals;
  const Index bs = effective_block_size(config.variant, config.bs_pred);
  for (int p = 0; p < group.size(); ++p) {
    const auto& members = assignment.members[static_cast<std::size_t>(p)];
    const Index k = anchors_for(static_cast<Index>(members.size()), bs);
    if (k == 0) {
      locals.emplace_back();
      locals.back().centers.resize(train.dim(), 0);
      continue;
    }
    locals.push_back(rac_cluster(test_scaled, members, k, mix_seed(config.cluster_seed, static_cast<std::uint64_t>(p), 0x7e57)));
  }
  BlockPartition test_part = merge_partitions(std::move(locals), train.dim());
  reorder_blocks(test_part, config.order_seed);

  VecchiaPrediction out;
  const auto nbrs = prediction_neighbors(train_layout.scaled, train.global_ids, train_layout.partition, test_part,
                                         config.m_pred, config.alpha, group, &out.nns_stats);

  out.mean = Eigen::VectorXd::Zero(targets.cols());
  out.variance = Eigen::VectorXd::Zero(targets.cols());
  for (Index b = 0; b < test_part.block_count(); ++b) {
    const auto& members = test_part.blocks[static_cast<std::size_t>(b)];
    const auto& cond = nbrs.sets[static_cast<std::size_t>(b)];
    const Eigen::MatrixXd block_pts = gather_points(targets, members);
    const Eigen::MatrixXd nbr_pts = gather_points(train.points, cond);
    BlockBatchEntry e;
    e.block = b;
    e.lk = cov_matrix(block_pts, params);
    e.con = cov_matrix(nbr_pts, params);
    e.cross = cross_cov_matrix(nbr_pts, block_pts, params);
    e.y_cond.resize(static_cast<Index>(cond.size()));
    for (std::size_t k = 0; k < cond.size(); ++k) e.y_cond[static_cast<Index>(k)] = train.responses[cond[k]];
    auto result = block_conditional(std::move(e));
    clamp_variances(result.variance);
    for (std::size_t k = 0; k < members.size(); ++k) {
      out.mean[members[k]] = result.mean[static_cast<Index>(k)];
      out.variance[members[k]] = result.variance[static_cast<Index>(k)];
    }
  }
  return out;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

SimulationSummary conditional_simulate(VectorRef mean, VectorRef variance, Index n_sim, std::uint64_t seed,
                                       double ci_level) {
  if (mean.size() != variance.size()) throw UsageError("conditional_simulate: length mismatch");
  if (n_sim < 2) throw UsageError("conditional_simulate: n_sim must be at least 2");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw UsageError("conditional_simulate: ci_level must lie in (0, 1)");
  const double z = normal_quantile(1.0 - (1.0 - ci_level) / 2.0);
  const Index n = mean.size();
  SimulationSummary out{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  Rng rng(seed);
  std::vector<double> draws(static_cast<std::size_t>(n_sim));
  for (Index j = 0; j < n; ++j) {
    if (!(variance[j] >= 0.0)) {
      throw UsageError("conditional_simulate: negative variance at point " + std::to_string(j));
    }
    const double sd = std::sqrt(variance[j]);
    double sum = 0.0;
    for (auto& x : draws) {
      x = mean[j] + sd * rng.normal();
      sum += x;
    }
    const double mu = sum / static_cast<double>(n_sim);
    double ss = 0.0;
    for (double x : draws) ss += (x - mu) * (x - mu);
    const double s = std::sqrt(ss / static_cast<double>(n_sim - 1));
    out.mean[j] = mu;
    out.sd[j] = s;
    out.ci_lo[j] = mu - z * s;
    out.ci_hi[j] = mu + z * s;
  }
  return out;
}

}  // namespace sbv
