#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sbv/distsim.hpp"
#include "sbv/kernel.hpp"
#include "sbv/partition.hpp"

namespace sbv {

/// Conditioning sets, one per block (indexed by block id). Entries are point
/// columns of the dataset, nearest first.
struct NeighborSets {
  std::vector<std::vector<Index>> sets;
};

/// Rank limit meaning "every block is admissible" (prediction mode).
inline constexpr Index kNoRankLimit = std::numeric_limits<Index>::max();

struct NnsStats {
  std::vector<int> escalations;  // radius doublings per query
  Index rounds = 0;              // collective exchange rounds
  std::uint64_t fine_candidates = 0;
  std::uint64_t payload_blocks = 0;  // blocks shipped through all_to_all

  [[nodiscard]] Index escalated_queries() const;
};

/// (alpha m zeta_d / n)^(1/d), zeta_d as defined separately for even and odd d.
double distance_threshold(Index n, Index m, Index d, double alpha);

/// Coarse filter between query center and data block: center distance within
/// lambda + query_radius + block_radius (with a 1e-12 relative round-off guard).
bool coarse_match(double center_dist2, double lambda, double query_radius, double block_radius);

/// A block shipped to another worker: its members with coordinates and rank.
struct BlockPayload {
  Index block = 0;
  Index rank = 0;
  std::vector<Index> columns;
  std::vector<std::int64_t> ids;
  Eigen::MatrixXd coords;
};

/// One all-gather of centers plus one all-to-all: worker p receives every
/// block whose center coarse-matches one of p's centers at radius lambda.
/// Inbox lists are sorted by block id.
std::vector<std::vector<BlockPayload>> coarse_candidates(PointsRef scaled, std::span<const std::int64_t> ids,
                                                         const BlockPartition& partition, double lambda,
                                                         WorkerGroup& group);

struct Candidate {
  double dist2 = 0.0;
  std::int64_t id = 0;
  Index column = 0;
};

/// Points of candidate blocks ranked strictly before `my_rank` whose distance
/// to `center` is below `lambda`.
std::vector<Candidate> fine_candidates(VectorRef center, std::span<const BlockPayload> blocks, double lambda,
                                       Index my_rank);

/// Keeps the min(m, |S|) nearest, ascending by (distance, id).
void select_nearest(std::vector<Candidate>& candidates, Index m);

/// m nearest columns of `coords` to `center`; ties by lower id. Returns
/// positions into `coords`.
std::vector<Index> knn_brute(VectorRef center, PointsRef coords, std::span<const std::int64_t> ids, Index m);

/// Exhaustive full-sort reference with the same tie rule as knn_brute.
std::vector<Index> knn_oracle(VectorRef center, PointsRef coords, std::span<const std::int64_t> ids, Index m);

/// Exact m-NN conditioning sets for every block among points of blocks
/// earlier in the global order. `scaled` is the search geometry.
NeighborSets filtered_knn_all(PointsRef scaled, std::span<const std::int64_t> ids,
                              const BlockPartition& partition, Index m, double alpha, WorkerGroup& group,
                              NnsStats* stats = nullptr);

/// Prediction mode: exact m-NN among all points of `train` for each block of
/// `queries` (whose own members are not searched). Results indexed by query
/// block id.
NeighborSets prediction_neighbors(PointsRef train_scaled, std::span<const std::int64_t> train_ids,
                                  const BlockPartition& train, const BlockPartition& queries, Index m,
                                  double alpha, WorkerGroup& group, NnsStats* stats = nullptr);

/// Brute-force reference for filtered_knn_all.
NeighborSets knn_oracle_all(PointsRef scaled, std::span<const std::int64_t> ids, const BlockPartition& partition,
                            Index m);

}  // namespace sbv
