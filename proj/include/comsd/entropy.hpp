#pragma once

// Particle-based state entropy proxy over a batch of embeddings.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "comsd/errors.hpp"
#include "comsd/ndmath.hpp"

namespace comsd {

struct KnnConfig {
  int k = 12;
  double stabilizer = 1.0;
};

// For each column i of `embeddings` (e x N): the k smallest Euclidean
// distances to other columns, ascending. Ties go to the lower index.
inline std::vector<std::vector<double>> KnnDistances(const Matrix& embeddings, int k) {
  const Eigen::Index n = embeddings.cols();
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  if (n <= k)
    throw ShapeError("knn: need more than k=" + std::to_string(k) + " points, got " +
                     std::to_string(n));
  // d2(j, i) = |h_j - h_i|^2, accumulated one embedding coordinate at a time
  const Matrix by_row = embeddings.transpose();
  Matrix d2 = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index r = 0; r < by_row.cols(); ++r)
      d2.col(i).array() += (by_row.col(r).array() - by_row(i, r)).square();

  // bounded insertion keeps the k best (distance, index) pairs in order
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n));
  std::vector<std::pair<double, Eigen::Index>> best;
  best.reserve(static_cast<std::size_t>(k) + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    best.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const std::pair<double, Eigen::Index> cand{d2(j, i), j};
      if (static_cast<int>(best.size()) == k && !(cand < best.back())) continue;
      best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      if (static_cast<int>(best.size()) > k) best.pop_back();
    }
    auto& row = out[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(k));
    for (std::size_t m = 0; m < row.size(); ++m) row[m] = std::sqrt(best[m].first);
  }
  return out;
}

// r_i = (1/k) * sum_m log(stabilizer + |h_i - h_(m)|)
inline Vector ExplorationReward(const Matrix& embeddings, const KnnConfig& cfg) {
  if (!embeddings.allFinite()) throw NumericError("exploration_reward: non-finite embedding");
  const auto knn = KnnDistances(embeddings, cfg.k);
  Vector r(embeddings.cols());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    double s = 0.0;
    for (double d : knn[static_cast<std::size_t>(i)]) s += std::log(cfg.stabilizer + d);
    r(i) = s / cfg.k;
  }
  return r;
}

}  // namespace comsd
