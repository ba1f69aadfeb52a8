#pragma once

// Behavioral-quality metrics over recorded skill rollouts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "comsd/entropy.hpp"
#include "comsd/errors.hpp"
#include "comsd/ndmath.hpp"
#include "comsd/skillspace.hpp"

namespace comsd {

struct SkillRollout {
  SkillVector skill;
  Matrix states;  // obs_dim x num_states
};

// n skills whose flag sweeps [0,1] evenly; every other coordinate is 0.5.
inline std::vector<SkillVector> GridSweep(int n, int d) {
  if (n < 2) throw std::invalid_argument("grid_sweep: n must be >= 2");
  if (d < 1) throw std::invalid_argument("grid_sweep: d must be >= 1");
  std::vector<SkillVector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SkillVector z(static_cast<std::size_t>(d), 0.5);
    z[0] = static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(std::move(z));
  }
  return out;
}

// All-k-nearest-neighbor distance: mean over states of the mean distance to
// their k nearest other states.
inline double Akd(const Matrix& states, int k) {
  if (states.cols() <= k) throw ShapeError("akd: need more states than k");
  const auto knn = KnnDistances(states, k);
  double total = 0.0;
  for (const auto& row : knn) {
    double s = 0.0;
    for (double d : row) s += d;
    total += s / k;
  }
  return total / static_cast<double>(knn.size());
}

struct AkdSummary {
  double variance = 0.0;  // population variance
  double range = 0.0;
  double max = 0.0;
};

inline AkdSummary SummarizeAkd(const std::vector<double>& akds) {
  if (akds.empty()) throw std::invalid_argument("akd_summary: no values");
  AkdSummary s;
  const auto [lo, hi] = std::minmax_element(akds.begin(), akds.end());
  s.max = *hi;
  s.range = *hi - *lo;
  double mean = 0.0;
  for (double a : akds) mean += a;
  mean /= static_cast<double>(akds.size());
  for (double a : akds) s.variance += (a - mean) * (a - mean);
  s.variance /= static_cast<double>(akds.size());
  return s;
}

inline AkdSummary SummarizeAkd(const std::vector<SkillRollout>& rollouts, int k) {
  if (rollouts.size() < 2) throw std::invalid_argument("akd_summary: need >= 2 rollouts");
  std::vector<double> akds;
  for (const auto& r : rollouts) akds.push_back(Akd(r.states, k));
  return SummarizeAkd(akds);
}

inline Vector MeanState(const Matrix& states) {
  if (states.cols() == 0) throw ShapeError("mean state: empty rollout");
  return states.rowwise().mean();
}

struct MsMetrics {
  double coverage = 0.0;       // mean distance to the k-th nearest mean state
  double coverage_aknn = 0.0;  // mean of the mean distance to the k nearest
  double range = 0.0;          // max over dims of the spread of mean states
};

inline MsMetrics ComputeMsMetrics(const Matrix& mean_states, int k) {
  if (mean_states.cols() <= k) throw ShapeError("ms_metrics: need more rollouts than k");
  const auto knn = KnnDistances(mean_states, k);
  MsMetrics m;
  for (const auto& row : knn) {
    m.coverage += row.back();
    double s = 0.0;
    for (double d : row) s += d;
    m.coverage_aknn += s / k;
  }
  const auto n = static_cast<double>(knn.size());
  m.coverage /= n;
  m.coverage_aknn /= n;
  m.range = (mean_states.rowwise().maxCoeff() - mean_states.rowwise().minCoeff()).maxCoeff();
  return m;
}

inline MsMetrics ComputeMsMetrics(const std::vector<SkillRollout>& rollouts, int k) {
  if (rollouts.empty()) throw ShapeError("ms_metrics: no rollouts");
  Matrix ms(rollouts.front().states.rows(), static_cast<Eigen::Index>(rollouts.size()));
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    if (rollouts[i].states.rows() != ms.rows())
      throw ShapeError("ms_metrics: rollouts differ in state dimension");
    ms.col(static_cast<Eigen::Index>(i)) = MeanState(rollouts[i].states);
  }
  return ComputeMsMetrics(ms, k);
}

// Number of occupied cells of a bins x bins grid over [-bound, bound]^2,
// using rows `dims` of `states` as the planar position.
inline int BinCoverage(const Matrix& states, std::pair<int, int> dims, int bins = 20,
                       double bound = 1.0) {
  if (bins < 1) throw std::invalid_argument("bin_coverage: bins must be >= 1");
  std::set<std::int64_t> cells;
  auto cell = [&](double v) {
    const auto c = static_cast<std::int64_t>(std::floor((v + bound) / (2.0 * bound) * bins));
    return std::clamp<std::int64_t>(c, 0, bins - 1);
  };
  for (Eigen::Index j = 0; j < states.cols(); ++j)
    cells.insert(cell(states(dims.first, j)) * bins + cell(states(dims.second, j)));
  return static_cast<int>(cells.size());
}

// Incremental variant used while training.
class CoverageGrid {
 public:
  CoverageGrid(int bins = 20, double bound = 1.0)
      : bins_(bins), bound_(bound), seen_(static_cast<std::size_t>(bins * bins), false) {}

  void Add(double x, double y) {
    const auto i = Cell(x) * bins_ + Cell(y);
    if (!seen_[static_cast<std::size_t>(i)]) {
      seen_[static_cast<std::size_t>(i)] = true;
      ++count_;
    }
  }
  int count() const { return count_; }

 private:
  int Cell(double v) const {
    const auto c = static_cast<int>(std::floor((v + bound_) / (2.0 * bound_) * bins_));
    return std::clamp(c, 0, bins_ - 1);
  }
  int bins_;
  double bound_;
  std::vector<bool> seen_;
  int count_ = 0;
};

}  // namespace comsd
