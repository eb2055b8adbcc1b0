#include "sbv/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sbv/errors.hpp"

namespace sbv {

namespace {

struct Budget {
  const std::function<double(const Eigen::VectorXd&)>& f;
  Eigen::Index limit;
  Eigen::Index used = 0;

  [[nodiscard]] bool exhausted() const { return used >= limit; }
  double operator()(const Eigen::VectorXd& x) {
    ++used;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }
};

}  // namespace

NelderMeadResult minimize_nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                      const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper, const NelderMeadOptions& options) {
  const Eigen::Index n = x0.size();
  if (n == 0 || lower.size() != n || upper.size() != n) throw UsageError("nelder_mead: dimension mismatch");
  if ((lower.array() > upper.array()).any()) throw UsageError("nelder_mead: lower bound exceeds upper bound");
  if (options.max_evals < 1) throw UsageError("nelder_mead: max_evals must be positive");

  const double dn = static_cast<double>(std::max<Eigen::Index>(n, 2));
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / dn;
  const double contract = 0.75 - 1.0 / (2.0 * dn);
  const double shrink = 1.0 - 1.0 / dn;

  auto project = [&](Eigen::VectorXd x) { return x.cwiseMax(lower).cwiseMin(upper); };
  Budget eval{f, options.max_evals};

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(project(x0));
  values.push_back(eval(simplex[0]));
  for (Eigen::Index i = 0; i < n && !eval.exhausted(); ++i) {
    Eigen::VectorXd v = simplex[0];
    v[i] += options.initial_step;
    if (v[i] > upper[i]) v[i] = simplex[0][i] - options.initial_step;
    v = project(v);
    simplex.push_back(v);
    values.push_back(eval(v));
  }

  NelderMeadResult out;
  std::vector<std::size_t> idx(simplex.size());
  auto sort_simplex = [&] {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (auto k : idx) {
      s2.push_back(simplex[k]);
      v2.push_back(values[k]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  if (static_cast<Eigen::Index>(simplex.size()) == n + 1) {
    while (true) {
      sort_simplex();
      const double best = values.front();
      const double worst = values.back();
      if (std::isfinite(worst) && worst - best <= options.rel_tol * std::max(1.0, std::abs(best))) {
        out.converged = true;
        break;
      }
      if (eval.exhausted()) break;

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) centroid += simplex[static_cast<std::size_t>(i)];
      centroid /= static_cast<double>(n);

      const Eigen::VectorXd xr = project(centroid + reflect * (centroid - simplex.back()));
      const double fr = eval(xr);
      if (fr < values.front()) {
        if (eval.exhausted()) {
          simplex.back() = xr;
          values.back() = fr;
          continue;
        }
        const Eigen::VectorXd xe = project(centroid + expand * (xr - centroid));
        const double fe = eval(xe);
        if (fe < fr) {
          simplex.back() = xe;
          values.back() = fe;
        } else {
          simplex.back() = xr;
          values.back() = fr;
        }
        continue;
      }
      if (fr < values[values.size() - 2]) {
        simplex.back() = xr;
        values.back() = fr;
        continue;
      }
      if (eval.exhausted()) {
        if (fr < values.back()) {
          simplex.back() = xr;
          values.back() = fr;
        }
        continue;
      }
      const bool outside = fr < values.back();
      const Eigen::VectorXd xc = outside ? project(centroid + contract * (xr - centroid))
                                         : project(centroid + contract * (simplex.back() - centroid));
      const double fc = eval(xc);
      if ((outside && fc <= fr) || (!outside && fc < values.back())) {
        simplex.back() = xc;
        values.back() = fc;
        continue;
      }
      for (std::size_t i = 1; i < simplex.size() && !eval.exhausted(); ++i) {
        simplex[i] = project(simplex[0] + shrink * (simplex[i] - simplex[0]));
        values[i] = eval(simplex[i]);
      }
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  out.x = simplex[best];
  out.value = values[best];
  out.evals = eval.used;
  return out;
}

}  // namespace sbv
