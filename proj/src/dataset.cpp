#include "sbv/dataset.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "sbv/errors.hpp"

namespace sbv {

void Dataset::validate() const {
  if (dim() < 1 || dim() > kMaxDimension) {
    throw UsageError("input dimension must lie in [1, " + std::to_string(kMaxDimension) +
                     "], got " + std::to_string(dim()));
  }
  if (responses.size() != size()) throw UsageError("responses length does not match point count");
  if (static_cast<Index>(global_ids.size()) != size()) {
    throw UsageError("global_ids length does not match point count");
  }
  if (!points.allFinite() || !responses.allFinite()) throw UsageError("dataset contains NaN or Inf");
  std::unordered_set<std::int64_t> seen;
  seen.reserve(global_ids.size());
  for (auto id : global_ids) {
    if (!seen.insert(id).second) throw UsageError("duplicate global id " + std::to_string(id));
  }
}

Dataset Dataset::from_points(Eigen::MatrixXd points, Eigen::VectorXd responses) {
  Dataset out;
  const Index n = points.cols();
  out.points = std::move(points);
  out.responses = responses.size() == 0 ? Eigen::VectorXd::Zero(n) : std::move(responses);
  out.global_ids.resize(static_cast<std::size_t>(n));
  std::iota(out.global_ids.begin(), out.global_ids.end(), std::int64_t{0});
  return out;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out;
  out.points = gather_points(points, rows);
  out.responses.resize(static_cast<Index>(rows.size()));
  out.global_ids.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.responses[static_cast<Index>(k)] = responses[rows[k]];
    out.global_ids[k] = global_ids[static_cast<std::size_t>(rows[k])];
  }
  return out;
}

NormalizeMode parse_normalize_mode(const std::string& text) {
  if (text == "minmax") return NormalizeMode::MinMax;
  if (text == "auto") return NormalizeMode::Auto;
  if (text == "none") return NormalizeMode::None;
  throw UsageError("normalize must be one of minmax, auto, none; got '" + text + "'");
}

Eigen::MatrixXd UnitCubeTransform::apply(const Eigen::MatrixXd& points) const {
  if (points.rows() != lower.size()) throw UsageError("transform dimension mismatch");
  Eigen::MatrixXd out = points;
  for (Index i = 0; i < out.rows(); ++i) {
    out.row(i) = (out.row(i).array() - lower[i]) / scale[i];
  }
  return out;
}

bool UnitCubeTransform::is_identity() const {
  return (lower.array() == 0.0).all() && (scale.array() == 1.0).all();
}

UnitCubeTransform fit_unit_cube(const Eigen::MatrixXd& points, NormalizeMode mode) {
  const Index d = points.rows();
  UnitCubeTransform t{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  if (mode == NormalizeMode::None || points.cols() == 0) return t;
  const Eigen::VectorXd lo = points.rowwise().minCoeff();
  const Eigen::VectorXd hi = points.rowwise().maxCoeff();
  if (mode == NormalizeMode::Auto && (lo.array() >= 0.0).all() && (hi.array() <= 1.0).all()) {
    return t;
  }
  t.lower = lo;
  for (Index i = 0; i < d; ++i) {
    const double span = hi[i] - lo[i];
    t.scale[i] = span > 0.0 ? span : 1.0;
  }
  return t;
}

double normalize_response_mean(Dataset& data) {
  const double mean = data.responses.size() ? data.responses.mean() : 0.0;
  if (mean == 0.0 || !std::isfinite(mean)) {
    throw UsageError("response mean is zero; cannot normalize to mean 1");
  }
  data.responses /= mean;
  return 1.0 / mean;
}

}  // namespace sbv
