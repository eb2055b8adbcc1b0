#include "sbv/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "sbv/errors.hpp"
#include "sbv/rng.hpp"

namespace sbv {

std::vector<Index> BlockPartition::ranks() const {
  std::vector<Index> rank(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) rank[static_cast<std::size_t>(order[k])] = static_cast<Index>(k);
  return rank;
}

void BlockPartition::update_centers(PointsRef scaled_points) {
  const Index bc = block_count();
  centers.resize(scaled_points.rows(), bc);
  radius.assign(static_cast<std::size_t>(bc), 0.0);
  for (Index b = 0; b < bc; ++b) {
    const auto& members = blocks[static_cast<std::size_t>(b)];
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(scaled_points.rows());
    for (Index i : members) sum += scaled_points.col(i);
    centers.col(b) = sum / static_cast<double>(members.size());
    double r2 = 0.0;
    for (Index i : members) r2 = std::max(r2, (scaled_points.col(i) - centers.col(b)).squaredNorm());
    radius[static_cast<std::size_t>(b)] = std::sqrt(r2);
  }
}

void BlockPartition::validate(Index n) const {
  const auto bc = blocks.size();
  if (order.size() != bc || owner.size() != bc || local_id.size() != bc || radius.size() != bc ||
      static_cast<std::size_t>(centers.cols()) != bc) {
    throw UsageError("partition: inconsistent per-block array sizes");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  Index covered = 0;
  for (const auto& block : blocks) {
    if (block.empty()) throw UsageError("partition: empty block");
    for (Index i : block) {
      if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]) {
        throw UsageError("partition: blocks overlap or reference invalid point " + std::to_string(i));
      }
      seen[static_cast<std::size_t>(i)] = 1;
      ++covered;
    }
  }
  if (covered != n) throw UsageError("partition: blocks do not cover every point");
  std::vector<char> used(bc, 0);
  for (Index b : order) {
    if (b < 0 || static_cast<std::size_t>(b) >= bc || used[static_cast<std::size_t>(b)]) {
      throw UsageError("partition: order is not a permutation");
    }
    used[static_cast<std::size_t>(b)] = 1;
  }
}

Index relevant_dim(VectorRef beta) {
  if (beta.size() == 0) throw UsageError("relevant_dim: empty beta");
  Index best = 0;
  for (Index i = 1; i < beta.size(); ++i) {
    if (1.0 / beta[i] > 1.0 / beta[best]) best = i;
  }
  return best;
}

Eigen::MatrixXd scale_points(PointsRef points, VectorRef beta) {
  if (points.rows() != beta.size()) throw UsageError("scale_points: dimension mismatch");
  Eigen::MatrixXd out(points.rows(), points.cols());
  for (Index j = 0; j < points.cols(); ++j) out.col(j) = points.col(j).cwiseQuotient(beta);
  return out;
}

Dataset scale_inputs(const Dataset& data, VectorRef beta) {
  Dataset out = data;
  out.points = scale_points(data.points, beta);
  return out;
}

int partition_assign(double x, int workers) {
  if (workers < 1) throw UsageError("partition_assign: worker count must be positive");
  if (!(x >= 0.0 && x <= 1.0)) {
    throw UsageError("partition_assign: coordinate " + std::to_string(x) +
                     " outside [0, 1]; inputs must be normalized");
  }
  const auto q = static_cast<int>(std::floor(x * workers));
  return std::min(q, workers - 1);
}

double WorkerAssignment::imbalance() const {
  if (members.empty()) return 1.0;
  std::size_t total = 0, peak = 0;
  for (const auto& m : members) {
    total += m.size();
    peak = std::max(peak, m.size());
  }
  if (total == 0) return 1.0;
  const double mean = static_cast<double>(total) / static_cast<double>(members.size());
  return static_cast<double>(peak) / mean;
}

WorkerAssignment distribute_points(PointsRef coords, Index dim, WorkerGroup& group) {
  const int workers = group.size();
  const Index n = coords.cols();
  std::vector<std::vector<Envelope<Index>>> outboxes(static_cast<std::size_t>(workers));
  for (int p = 0; p < workers; ++p) {
    const Index begin = n * p / workers;
    const Index end = n * (p + 1) / workers;
    auto& box = outboxes[static_cast<std::size_t>(p)];
    box.reserve(static_cast<std::size_t>(end - begin));
    for (Index i = begin; i < end; ++i) box.push_back({partition_assign(coords(dim, i), workers), i});
  }
  return WorkerAssignment{group.all_to_all(std::move(outboxes))};
}

Index anchors_for(Index local_n, Index block_size) {
  if (local_n <= 0) return 0;
  if (block_size < 1) throw UsageError("block size must be at least 1");
  const auto k = static_cast<Index>(std::llround(static_cast<double>(local_n) / static_cast<double>(block_size)));
  return std::clamp<Index>(k, 1, local_n);
}

BlockPartition rac_cluster(PointsRef scaled_points, std::span<const Index> local, Index anchors,
                           std::uint64_t seed) {
  const auto n_local = static_cast<Index>(local.size());
  if (anchors < 1 || anchors > n_local) {
    throw UsageError("rac_cluster: anchor count " + std::to_string(anchors) + " outside [1, " +
                     std::to_string(n_local) + "]");
  }
  BlockPartition part;
  part.blocks.assign(static_cast<std::size_t>(anchors), {});

  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(local.size(), static_cast<std::size_t>(anchors));

  if (anchors == n_local) {
    for (Index j = 0; j < anchors; ++j) part.blocks[static_cast<std::size_t>(j)].push_back(local[picks[static_cast<std::size_t>(j)]]);
  } else {
    const Index d = scaled_points.rows();
    Eigen::MatrixXd anchor_pts(d, anchors);
    std::vector<Index> anchor_of(local.size(), -1);
    for (Index j = 0; j < anchors; ++j) {
      anchor_pts.col(j) = scaled_points.col(local[picks[static_cast<std::size_t>(j)]]);
      anchor_of[picks[static_cast<std::size_t>(j)]] = j;
    }
    for (std::size_t pos = 0; pos < local.size(); ++pos) {
      Index best = anchor_of[pos];
      if (best < 0) {
        const double* x = scaled_points.col(local[pos]).data();
        double best_d2 = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < anchors; ++j) {
          const double* c = anchor_pts.col(j).data();
          double s = 0.0;
          Index k = 0;
          for (; k < d; ++k) {
            const double t = x[k] - c[k];
            s += t * t;
            if (s >= best_d2) break;
          }
          if (k == d && s < best_d2) {
            best_d2 = s;
            best = j;
          }
        }
      }
      part.blocks[static_cast<std::size_t>(best)].push_back(local[pos]);
    }
  }

  const auto bc = part.blocks.size();
  part.order.resize(bc);
  std::iota(part.order.begin(), part.order.end(), Index{0});
  part.owner.assign(bc, 0);
  part.local_id.resize(bc);
  std::iota(part.local_id.begin(), part.local_id.end(), Index{0});
  part.update_centers(scaled_points);
  return part;
}

void reorder_blocks(BlockPartition& partition, std::uint64_t seed) {
  const auto bc = partition.blocks.size();
  std::vector<std::tuple<std::uint64_t, int, Index, Index>> keys;
  keys.reserve(bc);
  for (std::size_t b = 0; b < bc; ++b) {
    const int w = partition.owner[b];
    const Index lid = partition.local_id[b];
    keys.emplace_back(mix_seed(seed, static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(lid)), w, lid,
                      static_cast<Index>(b));
  }
  std::sort(keys.begin(), keys.end());
  for (std::size_t k = 0; k < bc; ++k) partition.order[k] = std::get<3>(keys[k]);
}

BlockPartition merge_partitions(std::vector<BlockPartition> per_worker, Index dim) {
  BlockPartition out;
  Index total = 0;
  for (const auto& p : per_worker) total += p.block_count();
  out.centers.resize(dim, total);
  Index next = 0;
  for (std::size_t w = 0; w < per_worker.size(); ++w) {
    auto& part = per_worker[w];
    for (Index b = 0; b < part.block_count(); ++b) {
      out.blocks.push_back(std::move(part.blocks[static_cast<std::size_t>(b)]));
      out.centers.col(next) = part.centers.col(b);
      out.radius.push_back(part.radius[static_cast<std::size_t>(b)]);
      out.owner.push_back(static_cast<int>(w));
      out.local_id.push_back(b);
      out.order.push_back(next);
      ++next;
    }
  }
  return out;
}

PartitionResult build_partition(PointsRef coords, VectorRef geometry_beta, Index block_size,
                                std::uint64_t cluster_seed, std::uint64_t order_seed,
                                WorkerGroup& group, const Clusterer& clusterer) {
  if (coords.rows() != geometry_beta.size()) throw UsageError("build_partition: beta length mismatch");
  PartitionResult out;
  out.assignment = distribute_points(coords, relevant_dim(geometry_beta), group);
  out.scaled = scale_points(coords, geometry_beta);

  std::vector<BlockPartition> locals;
  locals.reserve(static_cast<std::size_t>(group.size()));
  for (int p = 0; p < group.size(); ++p) {
    const auto& members = out.assignment.members[static_cast<std::size_t>(p)];
    const Index k = anchors_for(static_cast<Index>(members.size()), block_size);
    if (k == 0) {
      locals.emplace_back();
      locals.back().centers.resize(coords.rows(), 0);
      continue;
    }
    const std::uint64_t seed = mix_seed(cluster_seed, static_cast<std::uint64_t>(p));
    locals.push_back(clusterer ? clusterer(out.scaled, members, k, seed) : rac_cluster(out.scaled, members, k, seed));
  }
  out.partition = merge_partitions(std::move(locals), coords.rows());
  reorder_blocks(out.partition, order_seed);
  return out;
}

}  // namespace sbv
