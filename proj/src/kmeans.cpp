#include "sbv/kmeans.hpp"

#include <limits>
#include <numeric>
#include <string>

#include "sbv/errors.hpp"
#include "sbv/rng.hpp"

namespace sbv {

BlockPartition kmeans_cluster(PointsRef points, std::span<const Index> local, Index k, std::uint64_t seed,
                              int max_iterations) {
  const auto n = static_cast<Index>(local.size());
  if (k < 1 || k > n) throw UsageError("kmeans_cluster: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  const Index d = points.rows();

  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(local.size(), static_cast<std::size_t>(k));
  Eigen::MatrixXd centers(d, k);
  for (Index j = 0; j < k; ++j) centers.col(j) = points.col(local[picks[static_cast<std::size_t>(j)]]);

  std::vector<Index> label(local.size(), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < local.size(); ++i) {
      Index best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < k; ++j) {
        const double d2 = (points.col(local[i]) - centers.col(j)).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = j;
        }
      }
      if (label[i] != best) {
        label[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d, k);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < local.size(); ++i) {
      sums.col(label[i]) += points.col(local[i]);
      counts[label[i]] += 1.0;
    }
    for (Index j = 0; j < k; ++j)
      if (counts[j] > 0) centers.col(j) = sums.col(j) / counts[j];
  }

  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < local.size(); ++i) groups[static_cast<std::size_t>(label[i])].push_back(local[i]);
  BlockPartition part;
  for (auto& g : groups)
    if (!g.empty()) part.blocks.push_back(std::move(g));
  const auto bc = part.blocks.size();
  part.order.resize(bc);
  std::iota(part.order.begin(), part.order.end(), Index{0});
  part.owner.assign(bc, 0);
  part.local_id.resize(bc);
  std::iota(part.local_id.begin(), part.local_id.end(), Index{0});
  part.update_centers(points);
  return part;
}

}  // namespace sbv
