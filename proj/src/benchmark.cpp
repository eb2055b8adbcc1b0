#include "sbv/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <tuple>

#include "sbv/errors.hpp"
#include "sbv/estimate.hpp"
#include "sbv/exact_gp.hpp"
#include "sbv/io.hpp"
#include "sbv/kmeans.hpp"
#include "sbv/rng.hpp"

namespace sbv {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<Index> to_indices(const std::vector<std::int64_t>& v, const char* key) {
  std::vector<Index> out;
  for (auto x : v) {
    if (x < 1) throw UsageError(std::string("scenario: '") + key + "' entries must be positive");
    out.push_back(static_cast<Index>(x));
  }
  return out;
}

std::vector<std::uint64_t> to_seeds(const std::vector<std::int64_t>& v) {
  std::vector<std::uint64_t> out;
  for (auto x : v) {
    if (x < 0) throw UsageError("scenario: seeds must be nonnegative");
    out.push_back(static_cast<std::uint64_t>(x));
  }
  return out;
}

VecchiaConfig cell_config(const Scenario& s, Variant v, Index m, Index bs, std::uint64_t seed) {
  VecchiaConfig c;
  c.variant = v;
  c.bs_est = uses_blocks(v) ? bs : 1;
  c.bs_pred = c.bs_est;
  c.m_est = m;
  c.m_pred = m;
  c.alpha = s.alpha;
  c.cluster_seed = mix_seed(s.cluster_seed, seed);
  c.order_seed = mix_seed(s.order_seed, seed);
  return c;
}

std::string num(double v) { return std::isnan(v) ? std::string("nan") : format_double(v); }

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

SyntheticData synthesize(const KernelParams& theta, Index n_train, Index n_test, std::uint64_t seed) {
  if (n_train < 1 || n_test < 0) throw UsageError("synthesize: invalid sizes");
  const Index d = theta.dim();
  theta.validate(d);
  const Index total = n_train + n_test;
  check_exact_size(total);
  Rng rng(mix_seed(seed, 1));
  Eigen::MatrixXd x(d, total);
  for (Index j = 0; j < total; ++j)
    for (Index i = 0; i < d; ++i) x(i, j) = rng.uniform01();
  const Eigen::VectorXd y = gp_simulate(x, theta, mix_seed(seed, 2));
  SyntheticData out;
  out.train = Dataset::from_points(x.leftCols(n_train), y.head(n_train));
  out.test = Dataset::from_points(x.rightCols(n_test), y.tail(n_test));
  return out;
}

Scenario load_scenario(const Config& cfg) {
  cfg.require_known({"name", "n", "n_test", "d", "sigma2", "beta", "nu", "tau2", "variants", "m", "bs", "seeds",
                     "alpha", "cluster_seed", "order_seed", "kl", "mspe", "rac_kmeans", "rac_m", "rac_seeds",
                     "rac_bs"});
  Scenario s;
  s.name = cfg.get_string("name", s.name);
  s.n = static_cast<Index>(cfg.get_int("n", s.n));
  s.n_test = static_cast<Index>(cfg.get_int("n_test", s.n_test));
  s.theta.sigma2 = cfg.get_double("sigma2", 1.0);
  s.theta.nu = cfg.get_double("nu", 3.5);
  s.theta.tau2 = cfg.get_double("tau2", 0.0);
  const auto beta = cfg.get_doubles("beta");
  s.theta.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Index>(beta.size()));
  if (cfg.has("d") && cfg.get_int("d") != s.theta.dim()) throw UsageError("scenario: d does not match beta length");
  s.theta.validate(s.theta.dim());
  for (const auto& v : cfg.get_strings("variants")) s.variants.push_back(parse_variant(v));
  s.m_values = to_indices(cfg.get_ints("m"), "m");
  s.bs_values = cfg.has("bs") ? to_indices(cfg.get_ints("bs"), "bs") : std::vector<Index>{1};
  s.seeds = cfg.has("seeds") ? to_seeds(cfg.get_ints("seeds")) : std::vector<std::uint64_t>{1};
  s.alpha = cfg.get_double("alpha", s.alpha);
  s.cluster_seed = cfg.get_seed("cluster_seed", s.cluster_seed);
  s.order_seed = cfg.get_seed("order_seed", s.order_seed);
  s.kl = cfg.get_bool("kl", s.kl);
  s.mspe = cfg.get_bool("mspe", s.mspe);
  s.rac_kmeans = cfg.get_bool("rac_kmeans", s.rac_kmeans);
  if (s.rac_kmeans) {
    s.rac_m_values = to_indices(cfg.get_ints("rac_m"), "rac_m");
    s.rac_seeds = to_seeds(cfg.get_ints("rac_seeds"));
    s.rac_bs = static_cast<Index>(cfg.get_int("rac_bs", s.rac_bs));
  }
  if (s.mspe && s.n_test < 1) throw UsageError("scenario: mspe needs n_test >= 1");
  if (s.n < 1) throw UsageError("scenario: n must be positive");
  if (s.seeds.empty() || s.variants.empty() || s.m_values.empty()) throw UsageError("scenario: empty sweep");
  return s;
}

std::vector<CellResult> run_cells(const Scenario& s, WorkerGroup& group) {
  std::vector<CellResult> out;
  for (const std::uint64_t seed : s.seeds) {
    const SyntheticData data = synthesize(s.theta, s.n, s.mspe ? s.n_test : 0, seed);
    const Dataset zero = Dataset::from_points(data.train.points, Eigen::VectorXd::Zero(data.train.size()));
    const double exact0 = s.kl ? exact_loglik(zero.points, zero.responses, s.theta) : 0.0;
    for (const Variant v : s.variants) {
      const std::vector<Index> sizes = uses_blocks(v) ? s.bs_values : std::vector<Index>{1};
      for (const Index m : s.m_values) {
        for (const Index bs : sizes) {
          CellResult cell;
          cell.variant = v;
          cell.m = m;
          cell.bs = bs;
          cell.seed = seed;
          cell.kl = std::numeric_limits<double>::quiet_NaN();
          cell.mspe = std::numeric_limits<double>::quiet_NaN();
          const VecchiaConfig cfg = cell_config(s, v, m, bs, seed);

          auto t0 = Clock::now();
          const Preprocessed pre = preprocess(data.train, cfg, geometry_beta(v, s.theta), group);
          cell.preprocess_seconds = seconds_since(t0);
          cell.escalations = pre.nns_stats.escalated_queries();

          t0 = Clock::now();
          const double ll0 = vecchia_loglik(zero, pre, s.theta, group);
          cell.eval_seconds = seconds_since(t0);
          if (s.kl) cell.kl = exact0 - ll0;

          if (s.mspe) {
            const VecchiaPrediction p = vecchia_predict(data.train, data.test.points, cfg, s.theta, group);
            cell.mspe = mspe(p.mean, data.test.responses);
          }
          out.push_back(cell);
        }
      }
    }
  }
  return out;
}

std::vector<RacComparison> run_rac_kmeans(const Scenario& s, WorkerGroup& group) {
  std::vector<RacComparison> out;
  const SyntheticData data = synthesize(s.theta, s.n, 0, s.seeds.front());
  const Clusterer kmeans = [](PointsRef pts, std::span<const Index> local, Index k, std::uint64_t seed) {
    return kmeans_cluster(pts, local, k, seed);
  };
  for (const Index m : s.rac_m_values) {
    for (const std::uint64_t anchor_seed : s.rac_seeds) {
      VecchiaConfig cfg = cell_config(s, Variant::SBV, m, s.rac_bs, s.seeds.front());
      cfg.cluster_seed = anchor_seed;
      const Eigen::VectorXd geo = geometry_beta(cfg.variant, s.theta);
      const Preprocessed rac = preprocess(data.train, cfg, geo, group);
      const Preprocessed km = preprocess(data.train, cfg, geo, group, kmeans);
      RacComparison r;
      r.m = m;
      r.anchor_seed = anchor_seed;
      r.loglik_rac = vecchia_loglik(data.train, rac, s.theta, group);
      r.loglik_kmeans = vecchia_loglik(data.train, km, s.theta, group);
      r.rel_error = std::abs(r.loglik_rac - r.loglik_kmeans) / std::abs(r.loglik_kmeans);
      out.push_back(r);
    }
  }
  return out;
}

std::vector<std::filesystem::path> run_benchmark(const Scenario& s, const std::filesystem::path& dir,
                                                 WorkerGroup& group) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const char* name) {
    written.push_back(dir / name);
    std::ofstream f(written.back(), std::ios::binary);
    if (!f) throw UsageError("cannot write '" + written.back().string() + "'");
    return f;
  };

  const auto cells = run_cells(s, group);
  {
    auto f = open("cells.csv");
    f << "scenario,variant,m,bs,seed,kl,mspe,preprocess_seconds,eval_seconds,escalations\n";
    for (const auto& c : cells)
      f << s.name << ',' << to_string(c.variant) << ',' << c.m << ',' << c.bs << ',' << c.seed << ',' << num(c.kl)
        << ',' << num(c.mspe) << ',' << num(c.preprocess_seconds) << ',' << num(c.eval_seconds) << ','
        << c.escalations << '\n';
  }
  {
    using Key = std::tuple<int, Index, Index>;
    std::map<Key, std::vector<const CellResult*>> groups;
    std::vector<Key> order;
    for (const auto& c : cells) {
      const Key k{static_cast<int>(c.variant), c.m, c.bs};
      if (!groups.count(k)) order.push_back(k);
      groups[k].push_back(&c);
    }
    auto f = open("summary.csv");
    f << "scenario,variant,m,bs,replicates,median_kl,median_mspe,median_eval_seconds\n";
    for (const auto& k : order) {
      std::vector<double> kl, ms, ev;
      for (const auto* c : groups[k]) {
        kl.push_back(c->kl);
        ms.push_back(c->mspe);
        ev.push_back(c->eval_seconds);
      }
      const auto* c0 = groups[k].front();
      f << s.name << ',' << to_string(c0->variant) << ',' << c0->m << ',' << c0->bs << ',' << groups[k].size() << ','
        << num(s.kl ? median(kl) : std::nan("")) << ',' << num(s.mspe ? median(ms) : std::nan("")) << ','
        << num(median(ev)) << '\n';
    }
  }
  if (s.rac_kmeans) {
    const auto rows = run_rac_kmeans(s, group);
    auto f = open("rac_kmeans.csv");
    f << "scenario,m,anchor_seed,loglik_rac,loglik_kmeans,rel_error\n";
    for (const auto& r : rows)
      f << s.name << ',' << r.m << ',' << r.anchor_seed << ',' << num(r.loglik_rac) << ',' << num(r.loglik_kmeans) << ','
        << num(r.rel_error) << '\n';
  }
  return written;
}

}  // namespace sbv
