#include "sbv/nns.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sbv/errors.hpp"

namespace sbv {

namespace {

inline double sq_dist(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

inline bool nearer(const Candidate& a, const Candidate& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.id < b.id);
}

// Uniform grid over at most two axes of a worker's block centers. A query
// visits every center whose cell overlaps the axis-aligned box of half-width
// R, so no center within distance R is missed.
class CenterGrid {
 public:
  CenterGrid(const Eigen::MatrixXd& centers, std::vector<Index> members)
      : centers_(&centers), members_(std::move(members)) {
    const Index d = centers.rows();
    const auto k = static_cast<Index>(members_.size());
    if (k == 0) return;
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = -lo;
    for (Index b : members_) {
      lo = lo.cwiseMin(centers.col(b));
      hi = hi.cwiseMax(centers.col(b));
    }
    std::vector<Index> dims(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) dims[static_cast<std::size_t>(i)] = i;
    std::stable_sort(dims.begin(), dims.end(), [&](Index a, Index b) { return hi[a] - lo[a] > hi[b] - lo[b]; });
    const int axes = static_cast<int>(std::min<Index>(2, d));
    const double target_cells = std::max(1.0, static_cast<double>(k) / 2.0);
    const auto per_axis = static_cast<Index>(std::max(1.0, std::floor(std::pow(target_cells, 1.0 / axes))));
    for (int a = 0; a < axes; ++a) {
      const Index dim = dims[static_cast<std::size_t>(a)];
      const double span = hi[dim] - lo[dim];
      axis_[a] = dim;
      lo_[a] = lo[dim];
      cells_[a] = span > 0.0 ? per_axis : 1;
      width_[a] = span > 0.0 ? span / static_cast<double>(cells_[a]) : 1.0;
    }
    axes_ = axes;
    buckets_.assign(static_cast<std::size_t>(cells_[0] * cells_[1]), {});
    for (Index b : members_) {
      buckets_[static_cast<std::size_t>(cell(0, (*centers_)(axis_[0], b)) +
                                        cells_[0] * (axes_ > 1 ? cell(1, (*centers_)(axis_[1], b)) : 0))]
          .push_back(b);
    }
  }

  template <class Visit>
  void query(const double* center, double reach, Visit&& visit) const {
    if (members_.empty()) return;
    if (!std::isfinite(reach)) {
      for (Index b : members_) visit(b);
      return;
    }
    Index from[2] = {0, 0}, to[2] = {0, 0};
    for (int a = 0; a < axes_; ++a) {
      const double x = center[axis_[a]];
      from[a] = range_cell(a, x - reach);
      to[a] = range_cell(a, x + reach);
    }
    // Visit in block-id order is not required; callers sort their results.
    for (Index j = from[1]; j <= to[1]; ++j) {
      for (Index i = from[0]; i <= to[0]; ++i) {
        for (Index b : buckets_[static_cast<std::size_t>(i + cells_[0] * j)]) visit(b);
      }
    }
  }

 private:
  Index cell(int a, double x) const {
    const double t = std::floor((x - lo_[a]) / width_[a]);
    return static_cast<Index>(std::clamp(t, 0.0, static_cast<double>(cells_[a] - 1)));
  }
  Index range_cell(int a, double x) const {
    const double t = std::floor((x - lo_[a]) / width_[a]);
    if (!(t > 0.0)) return 0;
    if (t >= static_cast<double>(cells_[a] - 1)) return cells_[a] - 1;
    return static_cast<Index>(t);
  }

  const Eigen::MatrixXd* centers_;
  std::vector<Index> members_;
  int axes_ = 1;
  Index axis_[2] = {0, 0};
  double lo_[2] = {0.0, 0.0};
  double width_[2] = {1.0, 1.0};
  Index cells_[2] = {1, 1};
  std::vector<std::vector<Index>> buckets_;
};

BlockPayload make_payload(PointsRef scaled, std::span<const std::int64_t> ids, const BlockPartition& part,
                          Index block, Index rank) {
  BlockPayload p;
  p.block = block;
  p.rank = rank;
  p.columns = part.blocks[static_cast<std::size_t>(block)];
  p.ids.reserve(p.columns.size());
  for (Index c : p.columns) p.ids.push_back(ids[static_cast<std::size_t>(c)]);
  p.coords = gather_points(scaled, p.columns);
  return p;
}

void collect_fine(const double* center, Index d, const BlockPayload& block, double lambda2, Index my_rank,
                  std::vector<Candidate>& out) {
  if (block.rank >= my_rank) return;
  for (Index k = 0; k < block.coords.cols(); ++k) {
    const double d2 = sq_dist(center, block.coords.col(k).data(), d);
    if (d2 < lambda2) {
      out.push_back({d2, block.ids[static_cast<std::size_t>(k)], block.columns[static_cast<std::size_t>(k)]});
    }
  }
}

std::vector<std::vector<Index>> local_blocks_by_worker(const BlockPartition& part, int workers) {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(workers));
  for (Index b = 0; b < part.block_count(); ++b) {
    const int w = part.owner[static_cast<std::size_t>(b)];
    if (w < 0 || w >= workers) {
      throw UsageError("block " + std::to_string(b) + " owned by rank " + std::to_string(w) +
                       " outside the worker group");
    }
    out[static_cast<std::size_t>(w)].push_back(b);
  }
  return out;
}

struct QuerySpec {
  Index id = 0;
  int owner = 0;
  Eigen::VectorXd center;
  double radius = 0.0;
  Index rank_limit = kNoRankLimit;
  Index admissible = 0;
};

struct QueryMsg {
  Index id = 0;
  int owner = 0;
  Eigen::VectorXd center;
  double radius = 0.0;
  Index rank_limit = 0;
  double lambda = 0.0;
};

struct MatchMsg {
  Index query = 0;
  std::vector<Index> blocks;
};

// Round-based exact search. Each round: all-gather pending queries, every
// worker answers with the blocks it owns that coarse-match (payloads sent at
// most once per destination), then each query owner filters, selects, and
// either finishes or doubles its radius.
NeighborSets run_search(PointsRef scaled, std::span<const std::int64_t> ids, const BlockPartition& data,
                        const std::vector<QuerySpec>& queries, Index query_count, Index m, double alpha,
                        WorkerGroup& group, NnsStats* stats) {
  const int workers = group.size();
  const Index d = scaled.rows();
  const Index n = scaled.cols();
  if (static_cast<Index>(ids.size()) != n) throw UsageError("nns: id count does not match points");
  if (m < 0) throw UsageError("nns: neighbor count must be nonnegative");

  NeighborSets result;
  result.sets.assign(static_cast<std::size_t>(query_count), {});
  NnsStats local_stats;
  local_stats.escalations.assign(static_cast<std::size_t>(query_count), 0);

  const auto rank = data.ranks();
  const auto owned = local_blocks_by_worker(data, workers);
  std::vector<CenterGrid> grids;
  std::vector<double> max_radius(static_cast<std::size_t>(workers), 0.0);
  grids.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    grids.emplace_back(data.centers, owned[static_cast<std::size_t>(w)]);
    for (Index b : owned[static_cast<std::size_t>(w)]) {
      max_radius[static_cast<std::size_t>(w)] = std::max(max_radius[static_cast<std::size_t>(w)], data.radius[static_cast<std::size_t>(b)]);
    }
  }

  const double lambda0 = (m > 0 && n > 0) ? distance_threshold(n, m, d, alpha) : 0.0;
  std::vector<double> lambda(static_cast<std::size_t>(query_count), lambda0);
  std::vector<std::vector<Index>> pending(static_cast<std::size_t>(workers));
  for (const auto& q : queries) {
    if (m == 0 || q.admissible == 0) continue;
    if (q.admissible <= m) lambda[static_cast<std::size_t>(q.id)] = std::numeric_limits<double>::infinity();
    pending[static_cast<std::size_t>(q.owner)].push_back(q.id);
  }
  std::vector<const QuerySpec*> spec_of(static_cast<std::size_t>(query_count), nullptr);
  for (const auto& q : queries) spec_of[static_cast<std::size_t>(q.id)] = &q;

  std::vector<std::vector<std::vector<char>>> sent(
      static_cast<std::size_t>(workers),
      std::vector<std::vector<char>>(static_cast<std::size_t>(workers)));
  std::vector<std::vector<int>> cache_slot(static_cast<std::size_t>(workers));
  std::vector<std::vector<BlockPayload>> cache(static_cast<std::size_t>(workers));

  while (true) {
    std::vector<Index> pending_count(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pending_count[static_cast<std::size_t>(w)] = static_cast<Index>(pending[static_cast<std::size_t>(w)].size());
    if (group.all_reduce_sum<Index>(pending_count) == 0) break;
    ++local_stats.rounds;

    std::vector<std::vector<QueryMsg>> outgoing(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      for (Index qid : pending[static_cast<std::size_t>(w)]) {
        const QuerySpec& q = *spec_of[static_cast<std::size_t>(qid)];
        outgoing[static_cast<std::size_t>(w)].push_back({qid, w, q.center, q.radius, q.rank_limit, lambda[static_cast<std::size_t>(qid)]});
      }
    }
    const auto replicas = group.all_gather_concat(outgoing);

    std::vector<std::vector<Envelope<BlockPayload>>> payload_out(static_cast<std::size_t>(workers));
    std::vector<std::vector<Envelope<MatchMsg>>> match_out(static_cast<std::size_t>(workers));
    for (int src = 0; src < workers; ++src) {
      const auto& msgs = replicas[static_cast<std::size_t>(src)];
      const double local_max = max_radius[static_cast<std::size_t>(src)];
      for (const auto& msg : msgs) {
        auto& sent_to = sent[static_cast<std::size_t>(src)][static_cast<std::size_t>(msg.owner)];
        if (sent_to.empty()) sent_to.assign(static_cast<std::size_t>(data.block_count()), 0);
        MatchMsg match{msg.id, {}};
        const double reach = (msg.lambda + msg.radius + local_max) * (1.0 + 1e-12) + 1e-12;
        grids[static_cast<std::size_t>(src)].query(msg.center.data(), reach, [&](Index b) {
          if (rank[static_cast<std::size_t>(b)] >= msg.rank_limit) return;
          const double c2 = sq_dist(msg.center.data(), data.centers.col(b).data(), d);
          if (!coarse_match(c2, msg.lambda, msg.radius, data.radius[static_cast<std::size_t>(b)])) return;
          match.blocks.push_back(b);
        });
        std::sort(match.blocks.begin(), match.blocks.end());
        for (Index b : match.blocks) {
          if (!sent_to[static_cast<std::size_t>(b)]) {
            sent_to[static_cast<std::size_t>(b)] = 1;
            payload_out[static_cast<std::size_t>(src)].push_back(
                {msg.owner, make_payload(scaled, ids, data, b, rank[static_cast<std::size_t>(b)])});
          }
        }
        match_out[static_cast<std::size_t>(src)].push_back({msg.owner, std::move(match)});
      }
    }
    auto payload_in = group.all_to_all(std::move(payload_out));
    auto match_in = group.all_to_all(std::move(match_out));

    for (int w = 0; w < workers; ++w) {
      auto& slots = cache_slot[static_cast<std::size_t>(w)];
      if (slots.empty()) slots.assign(static_cast<std::size_t>(data.block_count()), -1);
      auto& store = cache[static_cast<std::size_t>(w)];
      for (auto& p : payload_in[static_cast<std::size_t>(w)]) {
        ++local_stats.payload_blocks;
        slots[static_cast<std::size_t>(p.block)] = static_cast<int>(store.size());
        store.push_back(std::move(p));
      }
      // Merge per-sender match lists for each query.
      std::vector<std::vector<Index>> matched(pending[static_cast<std::size_t>(w)].size());
      std::vector<Index> slot_of_query(static_cast<std::size_t>(query_count), -1);
      for (std::size_t k = 0; k < pending[static_cast<std::size_t>(w)].size(); ++k) {
        slot_of_query[static_cast<std::size_t>(pending[static_cast<std::size_t>(w)][k])] = static_cast<Index>(k);
      }
      for (auto& msg : match_in[static_cast<std::size_t>(w)]) {
        auto& list = matched[static_cast<std::size_t>(slot_of_query[static_cast<std::size_t>(msg.query)])];
        list.insert(list.end(), msg.blocks.begin(), msg.blocks.end());
      }

      std::vector<Index> still_pending;
      std::vector<Candidate> found;
      for (std::size_t k = 0; k < pending[static_cast<std::size_t>(w)].size(); ++k) {
        const Index qid = pending[static_cast<std::size_t>(w)][k];
        const QuerySpec& q = *spec_of[static_cast<std::size_t>(qid)];
        const double lam = lambda[static_cast<std::size_t>(qid)];
        const double lam2 = lam * lam;
        found.clear();
        for (Index b : matched[k]) {
          collect_fine(q.center.data(), d, store[static_cast<std::size_t>(slots[static_cast<std::size_t>(b)])], lam2,
                       q.rank_limit, found);
        }
        local_stats.fine_candidates += found.size();
        if (static_cast<Index>(found.size()) >= m || static_cast<Index>(found.size()) == q.admissible) {
          select_nearest(found, m);
          auto& out = result.sets[static_cast<std::size_t>(qid)];
          out.reserve(found.size());
          for (const auto& c : found) out.push_back(c.column);
        } else {
          lambda[static_cast<std::size_t>(qid)] = lam * 2.0;
          ++local_stats.escalations[static_cast<std::size_t>(qid)];
          still_pending.push_back(qid);
        }
      }
      pending[static_cast<std::size_t>(w)] = std::move(still_pending);
    }
  }

  if (stats) *stats = std::move(local_stats);
  return result;
}

}  // namespace

Index NnsStats::escalated_queries() const {
  return static_cast<Index>(std::count_if(escalations.begin(), escalations.end(), [](int e) { return e > 0; }));
}

double distance_threshold(Index n, Index m, Index d, double alpha) {
  if (n < 1 || m < 1 || d < 1) throw UsageError("distance_threshold: n, m, d must be positive");
  if (!(alpha > 0.0)) throw UsageError("distance_threshold: alpha must be positive");
  const double dd = static_cast<double>(d);
  double zeta = 0.0;
  if (d % 2 == 0) {
    zeta = std::tgamma(dd / 2.0 + 1.0) / std::pow(std::numbers::pi, dd / 2.0);
  } else {
    zeta = 2.0 * std::pow(std::numbers::pi, (dd - 1.0) / 2.0) * std::tgamma((dd + 1.0) / 2.0) / std::tgamma(dd + 1.0);
  }
  return std::pow(alpha * static_cast<double>(m) * zeta / static_cast<double>(n), 1.0 / dd);
}

bool coarse_match(double center_dist2, double lambda, double query_radius, double block_radius) {
  const double reach = (lambda + query_radius + block_radius) * (1.0 + 1e-12) + 1e-12;
  return center_dist2 <= reach * reach;
}

std::vector<std::vector<BlockPayload>> coarse_candidates(PointsRef scaled, std::span<const std::int64_t> ids,
                                                         const BlockPartition& partition, double lambda,
                                                         WorkerGroup& group) {
  const int workers = group.size();
  const Index d = scaled.rows();
  const auto rank = partition.ranks();
  const auto owned = local_blocks_by_worker(partition, workers);

  struct CenterInfo {
    Index block;
    Eigen::VectorXd center;
    double radius;
  };
  std::vector<std::vector<CenterInfo>> mine(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    for (Index b : owned[static_cast<std::size_t>(w)]) {
      mine[static_cast<std::size_t>(w)].push_back({b, partition.centers.col(b), partition.radius[static_cast<std::size_t>(b)]});
    }
  }
  const auto replicas = group.all_gather_concat(mine);

  std::vector<std::vector<Envelope<BlockPayload>>> outboxes(static_cast<std::size_t>(workers));
  for (int src = 0; src < workers; ++src) {
    const auto& all = replicas[static_cast<std::size_t>(src)];
    for (Index b : owned[static_cast<std::size_t>(src)]) {
      std::vector<char> to(static_cast<std::size_t>(workers), 0);
      for (const auto& c : all) {
        const int dest = partition.owner[static_cast<std::size_t>(c.block)];
        if (to[static_cast<std::size_t>(dest)]) continue;
        const double c2 = sq_dist(c.center.data(), partition.centers.col(b).data(), d);
        if (coarse_match(c2, lambda, c.radius, partition.radius[static_cast<std::size_t>(b)])) to[static_cast<std::size_t>(dest)] = 1;
      }
      for (int dest = 0; dest < workers; ++dest) {
        if (to[static_cast<std::size_t>(dest)]) {
          outboxes[static_cast<std::size_t>(src)].push_back({dest, make_payload(scaled, ids, partition, b, rank[static_cast<std::size_t>(b)])});
        }
      }
    }
  }
  auto inboxes = group.all_to_all(std::move(outboxes));
  for (auto& box : inboxes) {
    std::sort(box.begin(), box.end(), [](const BlockPayload& a, const BlockPayload& b) { return a.block < b.block; });
  }
  return inboxes;
}

std::vector<Candidate> fine_candidates(VectorRef center, std::span<const BlockPayload> blocks, double lambda,
                                       Index my_rank) {
  std::vector<Candidate> out;
  const double lambda2 = lambda * lambda;
  for (const auto& b : blocks) {
    if (b.coords.rows() != center.size()) throw UsageError("fine_candidates: dimension mismatch");
    collect_fine(center.data(), center.size(), b, lambda2, my_rank, out);
  }
  return out;
}

void select_nearest(std::vector<Candidate>& candidates, Index m) {
  const auto keep = static_cast<std::size_t>(std::max<Index>(m, 0));
  if (candidates.size() > keep) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(), nearer);
    candidates.resize(keep);
  }
  std::sort(candidates.begin(), candidates.end(), nearer);
}

std::vector<Index> knn_brute(VectorRef center, PointsRef coords, std::span<const std::int64_t> ids, Index m) {
  if (coords.rows() != center.size()) throw UsageError("knn_brute: dimension mismatch");
  if (static_cast<Index>(ids.size()) != coords.cols()) throw UsageError("knn_brute: id count mismatch");
  std::vector<Candidate> all;
  all.reserve(static_cast<std::size_t>(coords.cols()));
  for (Index k = 0; k < coords.cols(); ++k) {
    all.push_back({sq_dist(center.data(), coords.col(k).data(), center.size()), ids[static_cast<std::size_t>(k)], k});
  }
  select_nearest(all, m);
  std::vector<Index> out;
  out.reserve(all.size());
  for (const auto& c : all) out.push_back(c.column);
  return out;
}

std::vector<Index> knn_oracle(VectorRef center, PointsRef coords, std::span<const std::int64_t> ids, Index m) {
  if (coords.rows() != center.size()) throw UsageError("knn_oracle: dimension mismatch");
  std::vector<std::pair<std::pair<double, std::int64_t>, Index>> keyed;
  keyed.reserve(static_cast<std::size_t>(coords.cols()));
  for (Index k = 0; k < coords.cols(); ++k) {
    keyed.push_back({{sq_dist(center.data(), coords.col(k).data(), center.size()), ids[static_cast<std::size_t>(k)]}, k});
  }
  std::sort(keyed.begin(), keyed.end());
  const auto keep = std::min<std::size_t>(keyed.size(), static_cast<std::size_t>(std::max<Index>(m, 0)));
  std::vector<Index> out;
  out.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) out.push_back(keyed[k].second);
  return out;
}

NeighborSets filtered_knn_all(PointsRef scaled, std::span<const std::int64_t> ids,
                              const BlockPartition& partition, Index m, double alpha, WorkerGroup& group,
                              NnsStats* stats) {
  const auto rank = partition.ranks();
  std::vector<Index> before(partition.order.size() + 1, 0);
  for (std::size_t k = 0; k < partition.order.size(); ++k) {
    before[k + 1] = before[k] + static_cast<Index>(partition.blocks[static_cast<std::size_t>(partition.order[k])].size());
  }
  std::vector<QuerySpec> queries;
  queries.reserve(partition.blocks.size());
  for (Index b = 0; b < partition.block_count(); ++b) {
    const auto r = rank[static_cast<std::size_t>(b)];
    queries.push_back({b, partition.owner[static_cast<std::size_t>(b)], partition.centers.col(b),
                       partition.radius[static_cast<std::size_t>(b)], r, before[static_cast<std::size_t>(r)]});
  }
  return run_search(scaled, ids, partition, queries, partition.block_count(), m, alpha, group, stats);
}

NeighborSets prediction_neighbors(PointsRef train_scaled, std::span<const std::int64_t> train_ids,
                                  const BlockPartition& train, const BlockPartition& queries_part, Index m,
                                  double alpha, WorkerGroup& group, NnsStats* stats) {
  if (queries_part.centers.rows() != train_scaled.rows()) throw UsageError("prediction_neighbors: dimension mismatch");
  std::vector<QuerySpec> queries;
  queries.reserve(queries_part.blocks.size());
  for (Index b = 0; b < queries_part.block_count(); ++b) {
    const int w = queries_part.owner[static_cast<std::size_t>(b)];
    if (w < 0 || w >= group.size()) throw UsageError("prediction_neighbors: query owner outside worker group");
    queries.push_back({b, w, queries_part.centers.col(b), queries_part.radius[static_cast<std::size_t>(b)],
                       kNoRankLimit, train_scaled.cols()});
  }
  return run_search(train_scaled, train_ids, train, queries, queries_part.block_count(), m, alpha, group, stats);
}

NeighborSets knn_oracle_all(PointsRef scaled, std::span<const std::int64_t> ids, const BlockPartition& partition,
                            Index m) {
  NeighborSets out;
  out.sets.resize(partition.blocks.size());
  const Index d = scaled.rows();
  std::vector<Index> admissible;
  std::vector<std::pair<std::pair<double, std::int64_t>, Index>> keyed;
  for (std::size_t k = 0; k < partition.order.size(); ++k) {
    const Index b = partition.order[k];
    const Eigen::VectorXd center = partition.centers.col(b);
    keyed.clear();
    for (Index c : admissible) {
      keyed.push_back({{sq_dist(center.data(), scaled.col(c).data(), d), ids[static_cast<std::size_t>(c)]}, c});
    }
    std::sort(keyed.begin(), keyed.end());
    const auto keep = std::min<std::size_t>(keyed.size(), static_cast<std::size_t>(std::max<Index>(m, 0)));
    auto& set = out.sets[static_cast<std::size_t>(b)];
    for (std::size_t j = 0; j < keep; ++j) set.push_back(keyed[j].second);
    const auto& members = partition.blocks[static_cast<std::size_t>(b)];
    admissible.insert(admissible.end(), members.begin(), members.end());
  }
  return out;
}

}  // namespace sbv
