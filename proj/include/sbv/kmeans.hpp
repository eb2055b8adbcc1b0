#pragma once

#include <cstdint>
#include <span>

#include "sbv/partition.hpp"

namespace sbv {

/// Lloyd's k-means over the columns `local` of `points`, seeded from k
/// distinct sampled members. Clusters left empty are dropped, so the result
/// may hold fewer than k blocks. Reference comparator for RAC only.
BlockPartition kmeans_cluster(PointsRef points, std::span<const Index> local, Index k, std::uint64_t seed,
                              int max_iterations = 50);

}  // namespace sbv
