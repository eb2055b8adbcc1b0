// Command-line driver: simulate, fit, predict, benchmark, nns-check.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "sbv/benchmark.hpp"
#include "sbv/config.hpp"
#include "sbv/errors.hpp"
#include "sbv/estimate.hpp"
#include "sbv/exact_gp.hpp"
#include "sbv/io.hpp"
#include "sbv/nns.hpp"
#include "sbv/rng.hpp"
#include "sbv/vecchia.hpp"

namespace fs = std::filesystem;
using namespace sbv;

namespace {

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

Eigen::VectorXd vector_of(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

Eigen::VectorXd expand(const std::vector<double>& v, Index d, const char* key) {
  if (v.size() == 1) return Eigen::VectorXd::Constant(d, v[0]);
  if (static_cast<Index>(v.size()) != d)
    throw UsageError(std::string(key) + " has " + std::to_string(v.size()) + " entries; data has d = " + std::to_string(d));
  return vector_of(v);
}

const std::set<std::string> kRunKeys = {
    "variant", "bs_est", "bs_pred", "m_est", "m_pred", "alpha", "cluster_seed", "order_seed", "sim_seed",
    "n_sim", "ci_level", "chunk_blocks", "nu", "max_evals", "rel_tol", "initial_step", "refit_rounds",
    "init_sigma2", "init_beta", "init_tau2", "sigma2_lo", "sigma2_hi", "beta_lo", "beta_hi", "tau2_lo",
    "tau2_hi", "normalize", "response_scale", "subsample", "subsample_seed", "warm_start", "warm_start_seed",
    "beta"};

VecchiaConfig vecchia_config(const Config& c) {
  VecchiaConfig v;
  v.variant = parse_variant(c.get_string("variant", "SBV"));
  const Index def_bs = uses_blocks(v.variant) ? 10 : 1;
  v.bs_est = static_cast<Index>(c.get_int("bs_est", def_bs));
  v.bs_pred = static_cast<Index>(c.get_int("bs_pred", def_bs));
  v.m_est = static_cast<Index>(c.get_int("m_est", v.m_est));
  v.m_pred = static_cast<Index>(c.get_int("m_pred", v.m_pred));
  v.alpha = c.get_double("alpha", v.alpha);
  v.cluster_seed = c.get_seed("cluster_seed", v.cluster_seed);
  v.order_seed = c.get_seed("order_seed", v.order_seed);
  v.sim_seed = c.get_seed("sim_seed", v.sim_seed);
  v.n_sim = static_cast<Index>(c.get_int("n_sim", v.n_sim));
  v.ci_level = c.get_double("ci_level", v.ci_level);
  v.chunk_blocks = static_cast<Index>(c.get_int("chunk_blocks", v.chunk_blocks));
  v.validate();
  return v;
}

// Inputs mapped to the unit cube, optional response rescaling.
struct Prepared {
  Dataset data;
  UnitCubeTransform transform;
  double response_factor = 1.0;
};

Prepared prepare(const fs::path& path, const Config& c) {
  Prepared p;
  auto loaded = read_dataset(path);
  if (!loaded.has_response) throw UsageError("'" + path.string() + "' has no response column named y");
  p.data = std::move(loaded.data);
  p.transform = fit_unit_cube(p.data.points, parse_normalize_mode(c.get_string("normalize", "auto")));
  p.data.points = p.transform.apply(p.data.points);
  const std::string rs = c.get_string("response_scale", "none");
  if (rs == "mean1")
    p.response_factor = normalize_response_mean(p.data);
  else if (rs != "none")
    throw UsageError("response_scale must be none or mean1; got '" + rs + "'");
  return p;
}

Dataset row_subsample(const Dataset& d, Index size, std::uint64_t seed) {
  if (size > d.size()) throw UsageError("subsample of " + std::to_string(size) + " exceeds n = " + std::to_string(d.size()));
  Rng rng(seed);
  const auto drawn = rng.sample_without_replacement(static_cast<std::size_t>(d.size()), static_cast<std::size_t>(size));
  std::vector<Index> rows(drawn.begin(), drawn.end());
  std::sort(rows.begin(), rows.end());
  return d.subset(rows);
}

int cmd_simulate(const fs::path& config_path, const fs::path& output) {
  const Config c = Config::load(config_path);
  c.require_known({"n", "d", "sigma2", "beta", "nu", "tau2", "seed"});
  const auto n = static_cast<Index>(c.get_int("n"));
  if (n < 1) throw UsageError("n must be positive");
  if (n > kExactOracleLimit) {
    throw UsageError("n = " + std::to_string(n) + " exceeds the exact simulation limit of " +
                     std::to_string(kExactOracleLimit) + "; Vecchia-based sequential simulation is not supported");
  }
  KernelParams p;
  p.sigma2 = c.get_double("sigma2", 1.0);
  p.nu = c.get_double("nu", 3.5);
  p.tau2 = c.get_double("tau2", 0.0);
  const auto beta = c.get_doubles("beta");
  const Index d = c.has("d") ? static_cast<Index>(c.get_int("d")) : static_cast<Index>(beta.size());
  if (d < 1 || d > kMaxDimension) throw UsageError("d must lie in [1, " + std::to_string(kMaxDimension) + "]");
  p.beta = expand(beta, d, "beta");
  p.validate(d);
  const auto sim = synthesize(p, n, 0, c.get_seed("seed", 1));
  write_csv(output, dataset_to_table(sim.train));
  return 0;
}

int cmd_fit(const fs::path& data_path, const fs::path& config_path, const fs::path& output, fs::path trace_path,
            int refit_rounds, Index max_evals_override, int workers) {
  const Config c = Config::load(config_path);
  c.require_known(kRunKeys);
  const VecchiaConfig vc = vecchia_config(c);
  Prepared prep = prepare(data_path, c);
  Dataset data = prep.data;
  if (c.has("subsample")) data = row_subsample(data, static_cast<Index>(c.get_int("subsample")), c.get_seed("subsample_seed", 11));
  const Index d = data.dim();

  ParamBounds bounds = default_bounds(data);
  bounds.sigma2_lo = c.get_double("sigma2_lo", bounds.sigma2_lo);
  bounds.sigma2_hi = c.get_double("sigma2_hi", bounds.sigma2_hi);
  bounds.tau2_lo = c.get_double("tau2_lo", bounds.tau2_lo);
  bounds.tau2_hi = c.get_double("tau2_hi", bounds.tau2_hi);
  if (c.has("beta_lo")) bounds.beta_lo = expand(c.get_doubles("beta_lo"), d, "beta_lo");
  if (c.has("beta_hi")) bounds.beta_hi = expand(c.get_doubles("beta_hi"), d, "beta_hi");

  KernelParams init = default_init(data, c.get_double("nu", 3.5));
  init.sigma2 = c.get_double("init_sigma2", init.sigma2);
  init.tau2 = std::max(c.get_double("init_tau2", init.tau2), bounds.tau2_lo);
  if (c.has("init_beta")) init.beta = expand(c.get_doubles("init_beta"), d, "init_beta");

  FitOptions opts;
  opts.max_evals = max_evals_override > 0 ? max_evals_override : static_cast<Index>(c.get_int("max_evals", 500));
  opts.rel_tol = c.get_double("rel_tol", opts.rel_tol);
  opts.initial_step = c.get_double("initial_step", opts.initial_step);
  opts.refit_rounds = refit_rounds > 0 ? refit_rounds : static_cast<int>(c.get_int("refit_rounds", 1));

  WorkerGroup group(workers);
  if (c.has("warm_start")) {
    const auto size = static_cast<Index>(c.get_int("warm_start"));
    init = warm_start_beta(data, size, vc, bounds, init, c.get_seed("warm_start_seed", 13), opts, group);
  }

  std::vector<std::pair<KernelParams, double>> trace;
  opts.on_evaluation = [&](const Preprocessed&, const KernelParams& p, double ll) { trace.emplace_back(p, ll); };
  const FitResult fit = mle_fit(data, vc, bounds, init, opts, group);

  if (trace_path.empty()) trace_path = fs::path(output.string() + ".trace.csv");
  {
    std::ofstream t(trace_path, std::ios::binary);
    if (!t) throw UsageError("cannot write '" + trace_path.string() + "'");
    t << "eval,loglik,sigma2";
    for (Index i = 0; i < d; ++i) t << ",beta" << (i + 1);
    t << ",tau2\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto& [p, ll] = trace[k];
      t << (k + 1) << ',' << format_double(ll) << ',' << format_double(p.sigma2);
      for (Index i = 0; i < d; ++i) t << ',' << format_double(p.beta[i]);
      t << ',' << format_double(p.tau2) << '\n';
    }
  }

  std::ofstream r(output, std::ios::binary);
  if (!r) throw UsageError("cannot write '" + output.string() + "'");
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fit.fingerprint));
  r << "variant=" << to_string(vc.variant) << '\n'
    << "n=" << data.size() << "\nd=" << d << '\n'
    << "sigma2=" << format_double(fit.theta_hat.sigma2) << '\n'
    << "beta=" << join(fit.theta_hat.beta) << '\n'
    << "nu=" << format_double(fit.theta_hat.nu) << '\n'
    << "tau2=" << format_double(fit.theta_hat.tau2) << '\n'
    << "relevance=" << join(fit.relevance) << '\n'
    << "loglik=" << format_double(fit.loglik) << '\n'
    << "iterations=" << fit.iterations << '\n'
    << "converged=" << (fit.converged ? "true" : "false") << '\n'
    << "preprocess_fingerprint=" << hex << '\n'
    << "escalated_queries=" << fit.nns_stats.escalated_queries() << '\n'
    << "nns_rounds=" << fit.nns_stats.rounds << '\n'
    << "imbalance=" << format_double(fit.imbalance) << '\n'
    << "wall_seconds=" << format_double(fit.seconds) << '\n'
    << "workers=" << workers << '\n'
    << "bs_est=" << vc.bs_est << "\nbs_pred=" << vc.bs_pred << '\n'
    << "m_est=" << vc.m_est << "\nm_pred=" << vc.m_pred << '\n'
    << "alpha=" << format_double(vc.alpha) << '\n'
    << "cluster_seed=" << vc.cluster_seed << "\norder_seed=" << vc.order_seed << "\nsim_seed=" << vc.sim_seed << '\n'
    << "n_sim=" << vc.n_sim << "\nci_level=" << format_double(vc.ci_level) << '\n'
    << "chunk_blocks=" << vc.chunk_blocks << '\n'
    << "normalize_lower=" << join(prep.transform.lower) << '\n'
    << "normalize_scale=" << join(prep.transform.scale) << '\n'
    << "response_factor=" << format_double(prep.response_factor) << '\n'
    << "trace=" << trace_path.string() << '\n';
  return 0;
}

int cmd_predict(const fs::path& train_path, const fs::path& test_path, const fs::path& report_path,
                const fs::path& output, int workers) {
  const Config rep = Config::load(report_path);
  const VecchiaConfig vc = vecchia_config(Config::parse([&] {
    std::string text;
    for (const char* k : {"variant", "bs_est", "bs_pred", "m_est", "m_pred", "alpha", "cluster_seed", "order_seed",
                          "sim_seed", "n_sim", "ci_level", "chunk_blocks"})
      if (rep.has(k)) text += std::string(k) + "=" + rep.get_string(k) + "\n";
    return text;
  }()));
  KernelParams theta;
  theta.sigma2 = rep.get_double("sigma2");
  theta.beta = vector_of(rep.get_doubles("beta"));
  theta.nu = rep.get_double("nu");
  theta.tau2 = rep.get_double("tau2");

  auto train = read_dataset(train_path);
  if (!train.has_response) throw UsageError("'" + train_path.string() + "' has no response column named y");
  auto test = read_dataset(test_path);
  const Index d = train.data.dim();
  if (test.data.dim() != d) {
    throw UsageError("test data has d = " + std::to_string(test.data.dim()) + " but training data has d = " +
                     std::to_string(d));
  }
  theta.validate(d);
  UnitCubeTransform t;
  t.lower = vector_of(rep.get_doubles("normalize_lower"));
  t.scale = vector_of(rep.get_doubles("normalize_scale"));
  if (t.lower.size() != d || t.scale.size() != d) throw UsageError("fit report dimension does not match the data");
  const double factor = rep.get_double("response_factor", 1.0);
  train.data.points = t.apply(train.data.points);
  train.data.responses *= factor;
  const Eigen::MatrixXd targets = t.apply(test.data.points);

  WorkerGroup group(workers);
  const auto pred = vecchia_predict(train.data, targets, vc, theta, group);
  const auto sim = conditional_simulate(pred.mean, pred.variance, vc.n_sim, vc.sim_seed, vc.ci_level);
  CsvTable out;
  out.header = {"mean", "sd", "ci_lo", "ci_hi"};
  out.rows.resize(targets.cols(), 4);
  out.rows.col(0) = sim.mean / factor;
  out.rows.col(1) = sim.sd / factor;
  out.rows.col(2) = sim.ci_lo / factor;
  out.rows.col(3) = sim.ci_hi / factor;
  write_csv(output, out);
  return 0;
}

int cmd_benchmark(const fs::path& scenario, const fs::path& dir, int workers) {
  WorkerGroup group(workers);
  const auto files = run_benchmark(load_scenario(Config::load(scenario)), dir, group);
  for (const auto& f : files) std::cout << f.string() << '\n';
  return 0;
}

int cmd_nns_check(const fs::path& data_path, const fs::path& config_path, int workers) {
  const Config c = Config::load(config_path);
  c.require_known(kRunKeys);
  const VecchiaConfig vc = vecchia_config(c);
  const Prepared prep = prepare(data_path, c);
  const Index d = prep.data.dim();
  const Eigen::VectorXd beta = c.has("beta") ? expand(c.get_doubles("beta"), d, "beta") : Eigen::VectorXd::Ones(d);
  KernelParams p;
  p.beta = beta;
  WorkerGroup group(workers);
  const Preprocessed pre = preprocess(prep.data, vc, geometry_beta(vc.variant, p), group);
  const auto ref = knn_oracle_all(pre.layout.scaled, prep.data.global_ids, pre.layout.partition, vc.m_est);
  Index mismatches = 0;
  for (std::size_t b = 0; b < ref.sets.size(); ++b)
    if (ref.sets[b] != pre.neighbors.sets[b]) ++mismatches;
  std::cout << "blocks=" << pre.layout.partition.block_count() << '\n'
            << "mismatches=" << mismatches << '\n'
            << "escalated_queries=" << pre.nns_stats.escalated_queries() << '\n'
            << "nns_rounds=" << pre.nns_stats.rounds << '\n'
            << "payload_blocks=" << pre.nns_stats.payload_blocks << '\n'
            << "imbalance=" << format_double(pre.layout.assignment.imbalance()) << '\n';
  return mismatches == 0 ? 0 : 3;
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaled block Vecchia Gaussian-process tools"};
  app.require_subcommand(1);
  int workers = 1;
  auto add_workers = [&](CLI::App* sub) {
    sub->add_option("--workers", workers, "Simulated worker count")->check(CLI::PositiveNumber);
  };

  std::string config, output, data, trace, train, test, report, scenario;
  int refit = 0;
  Index max_evals = 0;

  auto* sim = app.add_subcommand("simulate", "Draw a dataset from an exact GP");
  sim->add_option("--config", config)->required();
  sim->add_option("--output", output)->required();
  add_workers(sim);

  auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit");
  fit->add_option("--data", data)->required();
  fit->add_option("--config", config)->required();
  fit->add_option("--output", output, "Report path (key=value lines)")->required();
  fit->add_option("--trace", trace, "Trace CSV (default <output>.trace.csv)");
  fit->add_option("--refit-preprocess", refit, "Outer preprocessing rounds")->check(CLI::PositiveNumber);
  fit->add_option("--max-evals", max_evals, "Override max_evals")->check(CLI::PositiveNumber);
  add_workers(fit);

  auto* pred = app.add_subcommand("predict", "Predict at test inputs from a fit report");
  pred->add_option("--train", train)->required();
  pred->add_option("--test", test)->required();
  pred->add_option("--fit", report)->required();
  pred->add_option("--output", output)->required();
  add_workers(pred);

  auto* bench = app.add_subcommand("benchmark", "Run a scenario sweep");
  bench->add_option("--scenario", scenario)->required();
  bench->add_option("--output", output, "Output directory")->required();
  add_workers(bench);

  auto* check = app.add_subcommand("nns-check", "Compare filtered search against the exhaustive oracle");
  check->add_option("--data", data)->required();
  check->add_option("--config", config)->required();
  add_workers(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sbv: error: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(config, output);
    if (*fit) return cmd_fit(data, config, output, trace, refit, max_evals, workers);
    if (*pred) return cmd_predict(train, test, report, output, workers);
    if (*bench) return cmd_benchmark(scenario, output, workers);
    if (*check) return cmd_nns_check(data, config, workers);
  } catch (const UsageError& e) {
    std::cerr << "sbv: usage error: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "sbv: parse error: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "sbv: numerical error: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sbv: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
