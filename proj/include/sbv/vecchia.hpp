#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbv/dataset.hpp"
#include "sbv/distsim.hpp"
#include "sbv/kernel.hpp"
#include "sbv/nns.hpp"
#include "sbv/partition.hpp"

namespace sbv {

/// CV: classic (point-wise, unscaled geometry); BV: blocks, unscaled;
/// SV: point-wise, scaled geometry; SBV: blocks, scaled geometry.
enum class Variant { CV, BV, SV, SBV };

Variant parse_variant(const std::string& text);
std::string to_string(Variant v);
/// Whether neighbor search and clustering run in the beta-scaled geometry.
bool uses_scaling(Variant v);
/// Whether the variant conditions blocks rather than single points.
bool uses_blocks(Variant v);

struct VecchiaConfig {
  Variant variant = Variant::SBV;
  Index bs_est = 10;
  Index bs_pred = 10;
  Index m_est = 60;
  Index m_pred = 60;
  double alpha = 100.0;
  std::uint64_t cluster_seed = 1;
  std::uint64_t order_seed = 2;
  std::uint64_t sim_seed = 3;
  Index n_sim = 1000;
  double ci_level = 0.95;
  /// Blocks assembled and factorized together; bounds peak memory.
  Index chunk_blocks = 256;

  /// CV and SV require bs_est == bs_pred == 1; n_sim >= 2; ci_level in (0,1).
  void validate() const;
};

/// Covariance triplet and responses for one block.
struct BlockBatchEntry {
  Index block = 0;
  Eigen::MatrixXd lk;     // bs x bs, block with itself
  Eigen::MatrixXd con;    // m x m, neighbors with themselves
  Eigen::MatrixXd cross;  // m x bs, neighbors against block
  Eigen::VectorXd y_block;
  Eigen::VectorXd y_cond;
};

/// Partition and neighbor sets computed once and reused for every
/// likelihood evaluation.
struct Preprocessed {
  Eigen::VectorXd geometry_beta;
  PartitionResult layout;
  NeighborSets neighbors;
  NnsStats nns_stats;
  Index chunk_blocks = 256;

  /// FNV-1a hash of blocks, order, owners and neighbor sets.
  [[nodiscard]] std::uint64_t fingerprint() const;
};

/// Ones for the unscaled variants, params.beta otherwise.
Eigen::VectorXd geometry_beta(Variant v, const KernelParams& params);

/// Partitioning, clustering (bs_est; forced to 1 for CV/SV) and filtered
/// m_est-NN search. `data.points` must be normalized to [0,1]^d.
Preprocessed preprocess(const Dataset& data, const VecchiaConfig& config, VectorRef geometry_beta,
                        WorkerGroup& group, const Clusterer& clusterer = {});

/// Builds entries for `blocks` from the original (unscaled) inputs.
std::vector<BlockBatchEntry> assemble_batches(const Dataset& data, const BlockPartition& partition,
                                              const NeighborSets& neighbors, const KernelParams& params,
                                              std::span<const Index> blocks);

/// log N(y_block | conditional mean, conditional covariance). The entry's
/// storage is consumed by the factorizations.
double block_loglik(BlockBatchEntry entry);

struct BlockConditional {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // diagonal of the conditional covariance
};

/// Conditional mean and marginal variances of the block given its neighbors.
BlockConditional block_conditional(BlockBatchEntry entry);

/// Sum of block terms. Each worker evaluates the blocks it owns; terms are
/// gathered and summed in global block order, so the value is bit-identical
/// for any worker count. Blocks go to worker owner % P, so preprocessing
/// from one worker count can be evaluated under another. `per_block`, when
/// given, receives terms by block id.
double vecchia_loglik(const Dataset& data, const Preprocessed& pre, const KernelParams& params,
                      WorkerGroup& group, std::vector<double>* per_block = nullptr);

/// Convenience: preprocesses with geometry_beta(config.variant, params) first.
double vecchia_loglik(const Dataset& data, const VecchiaConfig& config, const KernelParams& params,
                      WorkerGroup& group);

struct VecchiaPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  NnsStats nns_stats;
};

/// Blockwise prediction at `targets` (normalized coordinates, d x n*). Test
/// blocks use bs_pred and condition on m_pred training points each.
VecchiaPrediction vecchia_predict(const Dataset& train, PointsRef targets, const VecchiaConfig& config,
                                  const KernelParams& params, WorkerGroup& group);

struct SimulationSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Eigen::VectorXd ci_lo;
  Eigen::VectorXd ci_hi;
};

/// Standard normal quantile.
double normal_quantile(double p);

/// n_sim draws from N(mean_j, variance_j) per point; returns the sample mean,
/// sample sd and mean -/+ z_{alpha/2} sd with alpha = 1 - ci_level.
SimulationSummary conditional_simulate(VectorRef mean, VectorRef variance, Index n_sim, std::uint64_t seed,
                                       double ci_level);

}  // namespace sbv
