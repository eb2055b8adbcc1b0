#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbv/config.hpp"
#include "sbv/dataset.hpp"
#include "sbv/distsim.hpp"
#include "sbv/kernel.hpp"
#include "sbv/vecchia.hpp"

namespace sbv {

struct SyntheticData {
  Dataset train;
  Dataset test;
};

/// Uniform inputs on [0,1]^d and one exact GP draw over train and test
/// jointly; the first n_train columns form the training set.
SyntheticData synthesize(const KernelParams& theta, Index n_train, Index n_test, std::uint64_t seed);

/// A sweep over variants x m x bs x seeds on one generating process.
struct Scenario {
  std::string name = "scenario";
  KernelParams theta;
  Index n = 2000;
  Index n_test = 0;
  std::vector<Variant> variants;
  std::vector<Index> m_values;
  std::vector<Index> bs_values;
  std::vector<std::uint64_t> seeds;
  double alpha = 100.0;
  std::uint64_t cluster_seed = 1;
  std::uint64_t order_seed = 2;
  bool kl = true;
  bool mspe = false;
  /// RAC against k-means: relative log-likelihood error per m and anchor seed.
  bool rac_kmeans = false;
  std::vector<Index> rac_m_values;
  std::vector<std::uint64_t> rac_seeds;
  Index rac_bs = 10;
};

/// Reads a scenario from `key = value` settings; unknown keys are rejected.
Scenario load_scenario(const Config& cfg);

struct CellResult {
  Variant variant = Variant::SBV;
  Index m = 0;
  Index bs = 1;
  std::uint64_t seed = 0;
  double kl = 0.0;    // NaN when not requested
  double mspe = 0.0;  // NaN when not requested
  double preprocess_seconds = 0.0;
  double eval_seconds = 0.0;
  Index escalations = 0;  // queries whose radius had to grow
};

/// CV and SV run once per (m, seed) with bs = 1.
std::vector<CellResult> run_cells(const Scenario& scenario, WorkerGroup& group);

struct RacComparison {
  Index m = 0;
  std::uint64_t anchor_seed = 0;
  double loglik_rac = 0.0;
  double loglik_kmeans = 0.0;
  double rel_error = 0.0;
};

/// SBV log-likelihood at the true parameters with RAC blocks versus Lloyd
/// k-means blocks of the same target size, data from the first seed.
std::vector<RacComparison> run_rac_kmeans(const Scenario& scenario, WorkerGroup& group);

/// Writes cells.csv, summary.csv (medians per variant, m, bs) and, when
/// requested, rac_kmeans.csv into `dir`. Returns the files written.
std::vector<std::filesystem::path> run_benchmark(const Scenario& scenario, const std::filesystem::path& dir,
                                                 WorkerGroup& group);

double median(std::vector<double> values);

}  // namespace sbv
