#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sbv/dataset.hpp"
#include "sbv/distsim.hpp"
#include "sbv/kernel.hpp"

namespace sbv {

/// Disjoint blocks over the columns of a point set, with a global order.
struct BlockPartition {
  std::vector<std::vector<Index>> blocks;  // member columns per block
  Eigen::MatrixXd centers;                 // d x bc, member means (scaled space)
  std::vector<double> radius;              // max member-to-center distance
  std::vector<Index> order;                // order[k] = block at position k
  std::vector<int> owner;                  // worker rank holding each block
  std::vector<Index> local_id;             // index among the owner's blocks

  [[nodiscard]] Index block_count() const { return static_cast<Index>(blocks.size()); }
  /// Inverse of `order`: position of each block.
  [[nodiscard]] std::vector<Index> ranks() const;
  /// Recomputes centers and radii from `scaled_points`.
  void update_centers(PointsRef scaled_points);
  /// Disjoint cover of [0, n), nonempty blocks, valid permutation and sizes.
  void validate(Index n) const;
};

/// argmax_i 1/beta_i, lowest index on ties.
Index relevant_dim(VectorRef beta);

/// Column-wise x_j / beta_j.
Eigen::MatrixXd scale_points(PointsRef points, VectorRef beta);
/// Same as scale_points on the inputs; responses and ids unchanged.
Dataset scale_inputs(const Dataset& data, VectorRef beta);

/// floor(x * P), with x == 1 mapped to P - 1. x must lie in [0, 1].
int partition_assign(double x, int workers);

struct WorkerAssignment {
  std::vector<std::vector<Index>> members;  // point columns held by each worker

  /// max load / mean load (1 is perfect balance).
  [[nodiscard]] double imbalance() const;
};

/// Contiguous initial load per worker, then one all-to-all moving each point
/// to partition_assign(x[dim], P). `coords` are the normalized inputs.
WorkerAssignment distribute_points(PointsRef coords, Index dim, WorkerGroup& group);

/// Random Anchor Clustering of the columns `local` of `scaled_points`; block
/// members are reported as columns of `scaled_points`. Order is identity and
/// owner 0 until the caller sets them.
BlockPartition rac_cluster(PointsRef scaled_points, std::span<const Index> local, Index anchors,
                           std::uint64_t seed);

/// Anchor count for a worker holding n points at target mean block size bs.
Index anchors_for(Index local_n, Index block_size);

/// Random global order: each block gets key mix(seed, owner, local_id), and
/// blocks are sorted by key.
void reorder_blocks(BlockPartition& partition, std::uint64_t seed);

/// Merges per-worker partitions into one, setting owner and local_id.
BlockPartition merge_partitions(std::vector<BlockPartition> per_worker, Index dim);

struct PartitionResult {
  Eigen::MatrixXd scaled;     // geometry used for clustering and search
  BlockPartition partition;   // global, ordered
  WorkerAssignment assignment;
};

/// Same contract as rac_cluster; lets a comparator clustering replace RAC.
using Clusterer = std::function<BlockPartition(PointsRef, std::span<const Index>, Index, std::uint64_t)>;

/// Partitioning, scaling, clustering per worker (RAC unless `clusterer` is
/// set) and global reordering. `coords` must be normalized to [0,1]^d;
/// `geometry_beta` sets the scaling.
PartitionResult build_partition(PointsRef coords, VectorRef geometry_beta, Index block_size,
                                std::uint64_t cluster_seed, std::uint64_t order_seed,
                                WorkerGroup& group, const Clusterer& clusterer = {});

}  // namespace sbv
