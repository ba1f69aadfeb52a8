#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "comsd/entropy.hpp"
#include "oracles.hpp"

namespace comsd {
namespace {

TEST(ExplorationRewardTest, TwoPointsOneNeighbor) {
  Matrix h(1, 2);
  h << 0.0, 1.0;
  const Vector r = ExplorationReward(h, {1, 1.0});
  EXPECT_NEAR(r(0), std::log(2.0), 1e-15);
  EXPECT_NEAR(r(1), 0.693147, 1e-6);
}

TEST(ExplorationRewardTest, IdenticalEmbeddingsGiveZero) {
  const Matrix h = Matrix::Constant(3, 10, 0.4);
  const Vector r = ExplorationReward(h, {4, 1.0});
  for (Eigen::Index i = 0; i < r.size(); ++i) EXPECT_EQ(r(i), 0.0);
}

TEST(ExplorationRewardTest, MatchesFullSortOracle) {
  Rng rng(5);
  const Matrix h = oracle::RandomMatrix(3, 20, rng);
  const Vector r = ExplorationReward(h, {3, 1.0});
  const auto ref = oracle::ParticleReward(h, 3);
  for (Eigen::Index i = 0; i < 20; ++i)
    EXPECT_NEAR(r(i), ref[static_cast<std::size_t>(i)], 1e-9 * std::abs(ref[static_cast<std::size_t>(i)]));
}

TEST(ExplorationRewardTest, MatchesOracleOnRandomBatches) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<Eigen::Index>(20 + rng() % 100);
    const auto e = static_cast<Eigen::Index>(1 + rng() % 16);
    const int k = static_cast<int>(1 + rng() % 12);
    Matrix h = oracle::RandomMatrix(e, n, rng, -2.0, 2.0);
    h.col(n - 1) = h.col(0);  // an exact duplicate exercises tie handling
    const Vector r = ExplorationReward(h, {k, 1.0});
    const auto ref = oracle::ParticleReward(h, k);
    for (Eigen::Index i = 0; i < n; ++i)
      ASSERT_NEAR(r(i), ref[static_cast<std::size_t>(i)],
                  1e-9 * std::max(1.0, std::abs(ref[static_cast<std::size_t>(i)])));
  }
}

TEST(ExplorationRewardTest, StabilizerIsConfigurable) {
  Matrix h(1, 2);
  h << 0.0, 2.0;
  EXPECT_NEAR(ExplorationReward(h, {1, 0.5})(0), std::log(2.5), 1e-15);
}

TEST(ExplorationRewardTest, NonNegativePermutationEquivariantAndScaleMonotone) {
  Rng rng(7);
  const Matrix h = oracle::RandomMatrix(4, 30, rng);
  const Vector r = ExplorationReward(h, {5, 1.0});
  EXPECT_GE(r.minCoeff(), 0.0);

  std::vector<Eigen::Index> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix hp(4, 30);
  for (Eigen::Index i = 0; i < 30; ++i) hp.col(i) = h.col(perm[static_cast<std::size_t>(i)]);
  const Vector rp = ExplorationReward(hp, {5, 1.0});
  for (Eigen::Index i = 0; i < 30; ++i) EXPECT_NEAR(rp(i), r(perm[static_cast<std::size_t>(i)]), 1e-12);

  const Vector rs = ExplorationReward(2.5 * h, {5, 1.0});
  for (Eigen::Index i = 0; i < 30; ++i) EXPECT_GE(rs(i), r(i));
}

TEST(KnnDistancesTest, SortedAscendingWithTies) {
  Matrix h(1, 4);
  h << 0.0, 1.0, -1.0, 3.0;
  const auto d = KnnDistances(h, 3);
  EXPECT_EQ(d[0], (std::vector<double>{1.0, 1.0, 3.0}));
  EXPECT_EQ(d[3], (std::vector<double>{2.0, 3.0, 4.0}));
}

TEST(KnnDistancesTest, NeedsMorePointsThanK) {
  EXPECT_THROW(ExplorationReward(Matrix::Zero(2, 3), {3, 1.0}), ShapeError);
  Matrix bad = Matrix::Zero(2, 5);
  bad(0, 0) = NAN;
  EXPECT_THROW(ExplorationReward(bad, {2, 1.0}), NumericError);
}

}  // namespace
}  // namespace comsd
