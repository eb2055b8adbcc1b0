#pragma once

// In-process stand-in for the P-worker collectives used by the distributed
// pipeline. A collective is one call carrying every worker's contribution,
// which models a bulk-synchronous barrier: all P workers enter, all leave
// with their results. Workers are run by a sequential round-robin scheduler
// (the caller's loop over ranks), so results never depend on interleaving.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbv/errors.hpp"

namespace sbv {

template <class T>
struct Envelope {
  int dest = 0;
  T payload{};
};

class WorkerGroup {
 public:
  explicit WorkerGroup(int workers) : workers_(workers) {
    if (workers < 1) throw UsageError("worker count must be at least 1");
  }

  [[nodiscard]] int size() const { return workers_; }
  /// Number of collectives completed so far.
  [[nodiscard]] std::uint64_t epoch() const { return epoch_; }
  /// Envelopes delivered to a rank other than their source, summed over epochs.
  [[nodiscard]] std::uint64_t remote_messages() const { return remote_messages_; }

  /// outboxes[p] holds what rank p emits. Inbox q receives its payloads
  /// ordered by (source rank, emission order).
  template <class T>
  std::vector<std::vector<T>> all_to_all(std::vector<std::vector<Envelope<T>>> outboxes) {
    enter(outboxes.size(), "all_to_all");
    for (const auto& box : outboxes) {
      for (const auto& env : box) {
        if (env.dest < 0 || env.dest >= workers_) {
          throw UsageError("all_to_all: destination rank " + std::to_string(env.dest) +
                           " outside [0, " + std::to_string(workers_) + ")");
        }
      }
    }
    std::vector<std::vector<T>> inboxes(static_cast<std::size_t>(workers_));
    for (int src = 0; src < workers_; ++src) {
      for (auto& env : outboxes[static_cast<std::size_t>(src)]) {
        if (env.dest != src) ++remote_messages_;
        inboxes[static_cast<std::size_t>(env.dest)].push_back(std::move(env.payload));
      }
    }
    return inboxes;
  }

  /// Every rank receives the rank-ordered list of contributions; one replica
  /// per rank is returned.
  template <class T>
  std::vector<std::vector<T>> all_gather(const std::vector<T>& items) {
    enter(items.size(), "all_gather");
    return std::vector<std::vector<T>>(static_cast<std::size_t>(workers_), items);
  }

  /// Concatenation of per-rank lists, rank-ordered, replicated once per rank.
  template <class T>
  std::vector<std::vector<T>> all_gather_concat(const std::vector<std::vector<T>>& items) {
    enter(items.size(), "all_gather");
    std::vector<T> joined;
    for (const auto& part : items) joined.insert(joined.end(), part.begin(), part.end());
    return std::vector<std::vector<T>>(static_cast<std::size_t>(workers_), joined);
  }

  /// Sum accumulated as rank 0 + rank 1 + ...; the same value goes to every rank.
  template <class T>
  T all_reduce_sum(std::span<const T> per_worker) {
    enter(per_worker.size(), "all_reduce_sum");
    T total{};
    for (const T& v : per_worker) total += v;
    return total;
  }

 private:
  void enter(std::size_t contributions, const char* name) {
    if (contributions != static_cast<std::size_t>(workers_)) {
      throw UsageError(std::string(name) + ": expected " + std::to_string(workers_) +
                       " contributions, got " + std::to_string(contributions));
    }
    ++epoch_;
  }

  int workers_;
  std::uint64_t epoch_ = 0;
  std::uint64_t remote_messages_ = 0;
};

}  // namespace sbv
