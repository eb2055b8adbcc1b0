#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sbv {

/// Mixes 64-bit words into a well-distributed seed (SplitMix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Portable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Every derived variate is computed here rather than through
/// <random> distributions, whose algorithms are implementation-defined:
///   - uniform01: top 53 bits scaled by 2^-53, in [0, 1)
///   - uniform_index: Lemire's multiply-shift with rejection
///   - normal: Box-Muller, both variates of each pair consumed in order
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound);
  double normal();
  void fill_normal(std::span<double> out);

  /// In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  /// k distinct indices from [0, n), uniformly, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sbv
