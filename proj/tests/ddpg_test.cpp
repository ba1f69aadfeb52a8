#include <gtest/gtest.h>

#include <cmath>

#include "comsd/ddpg.hpp"
#include "oracles.hpp"

namespace comsd {
namespace {

DdpgConfig Tiny(double stddev = 0.0) {
  DdpgConfig c;
  c.hidden = 6;
  c.learning_rate = 1e-3;
  c.stddev = stddev;
  return c;
}

std::vector<double> ColVec(const Matrix& m, Eigen::Index c) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

TEST(CriticTest, ScriptedSingleTransition) {
  Rng rng(1);
  AgentBundle b = AgentBundle::Create(3, 2, Tiny(), rng);
  Rng other(2);
  b.target_critic.InitUniform(other);  // distinct from the online critic
  DdpgBatch batch{Matrix(3, 1), Matrix(2, 1), Vector(1), Matrix(3, 1), Vector(1)};
  batch.state << 0.1, -0.2, 0.3;
  batch.action << 0.5, -0.5;
  batch.ret << 1.25;
  batch.next_state << 0.4, 0.0, -0.1;
  batch.discount << 0.99 * 0.99 * 0.99;

  auto next_in = ColVec(batch.next_state, 0);
  const auto next_a = oracle::NetForward(b.actor, next_in);
  next_in.insert(next_in.end(), next_a.begin(), next_a.end());
  const double y = 1.25 + 0.970299 * oracle::NetForward(b.target_critic, next_in)[0];
  auto in = ColVec(batch.state, 0);
  in.push_back(0.5);
  in.push_back(-0.5);
  const double q = oracle::NetForward(b.critic, in)[0];

  const Vector target = CriticTarget(b, batch, rng);
  EXPECT_NEAR(target(0), y, 1e-12);
  EXPECT_NEAR(CriticLossAndGrad(b.critic, batch, target).loss, (q - y) * (q - y), 1e-12);
}

TEST(CriticTest, ZeroDiscountRegressesOnReturn) {
  Rng rng(3);
  AgentBundle b = AgentBundle::Create(2, 1, Tiny(0.2), rng);
  DdpgBatch batch{oracle::RandomMatrix(2, 5, rng), oracle::RandomMatrix(1, 5, rng),
                  oracle::RandomMatrix(5, 1, rng).col(0), oracle::RandomMatrix(2, 5, rng),
                  Vector::Zero(5)};
  EXPECT_EQ(CriticTarget(b, batch, rng), batch.ret);
  for (auto& t : b.target_critic.params()) t.setZero();
  batch.discount.setConstant(0.9);
  EXPECT_TRUE(CriticTarget(b, batch, rng).isApprox(batch.ret, 1e-15));
}

TEST(CriticTest, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  AgentBundle b = AgentBundle::Create(3, 2, Tiny(), rng);
  const DdpgBatch batch{oracle::RandomMatrix(3, 4, rng), oracle::RandomMatrix(2, 4, rng),
                        Vector(), Matrix(), Vector()};
  const Vector y = oracle::RandomMatrix(4, 1, rng).col(0);
  const auto r = CriticLossAndGrad(b.critic, batch, y);
  auto loss = [&] { return CriticLossAndGrad(b.critic, batch, y).loss; };
  EXPECT_LT(oracle::CheckGradient(b.critic.params(), r.grad, loss).max_rel_error, 1e-4);
}

TEST(ActorTest, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  AgentBundle b = AgentBundle::Create(3, 2, Tiny(), rng);
  const Matrix s = oracle::RandomMatrix(3, 4, rng);
  const auto r = ActorLossAndGrad(b.actor, b.critic, s);
  auto loss = [&] { return ActorLossAndGrad(b.actor, b.critic, s).loss; };
  EXPECT_LT(oracle::CheckGradient(b.actor.params(), r.grad, loss).max_rel_error, 1e-4);
}

TEST(ActorTest, CriticBlindToActionGivesZeroGradient) {
  Rng rng(6);
  AgentBundle b = AgentBundle::Create(2, 1, Tiny(), rng);
  b.critic.weight(0).rightCols(1).setZero();  // first layer ignores the action input
  const auto r = ActorLossAndGrad(b.actor, b.critic, oracle::RandomMatrix(2, 3, rng));
  for (const auto& g : r.grad) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ActorTest, DriftsTowardQuadraticCriticOptimum) {
  Rng rng(7);
  DdpgConfig cfg = Tiny();
  cfg.hidden = 32;
  AgentBundle b = AgentBundle::Create(1, 1, cfg, rng);
  // fit Q(s, a) = -(a - 0.3)^2 first
  AdamState copt(b.critic.params(), 1e-2);
  for (int it = 0; it < 2000; ++it) {
    DdpgBatch batch{Matrix::Ones(1, 64), oracle::RandomMatrix(1, 64, rng), Vector(), Matrix(),
                    Vector()};
    const Vector y = -(batch.action.row(0).transpose().array() - 0.3).square();
    const auto r = CriticLossAndGrad(b.critic, batch, y);
    AdamStep(b.critic.params(), r.grad, copt);
  }
  b.actor.bias(b.actor.num_layers() - 1).setConstant(-1.0);
  const Matrix s = Matrix::Ones(1, 1);
  const double before = Forward(b.actor, s)(0, 0);
  AdamState aopt(b.actor.params(), 1e-2);
  for (int it = 0; it < 200; ++it) {
    const auto r = ActorLossAndGrad(b.actor, b.critic, s);
    AdamStep(b.actor.params(), r.grad, aopt);
  }
  const double after = Forward(b.actor, s)(0, 0);
  EXPECT_LT(std::abs(after - 0.3), std::abs(before - 0.3));
  EXPECT_NEAR(after, 0.3, 0.05);
}

TEST(SoftUpdateTest, GeometricSeries) {
  Rng rng(8);
  AgentBundle b = AgentBundle::Create(1, 1, Tiny(), rng);
  for (auto& t : b.target_critic.params()) t.setZero();
  for (auto& t : b.critic.params()) t.setOnes();
  SoftUpdate(b);
  EXPECT_NEAR(b.target_critic.params()[0](0, 0), 0.01, 1e-15);
  for (int i = 1; i < 100; ++i) SoftUpdate(b);
  for (const auto& t : b.target_critic.params())
    for (Eigen::Index i = 0; i < t.size(); ++i)
      EXPECT_NEAR(t.data()[i], 1.0 - std::pow(0.99, 100), 1e-12);
  EXPECT_NEAR(1.0 - std::pow(0.99, 100), 0.6340, 1e-4);
}

TEST(SoftUpdateTest, LagShrinksByExactFactor) {
  Rng rng(9);
  AgentBundle b = AgentBundle::Create(2, 1, Tiny(), rng);
  Rng other(10);
  b.target_critic.InitUniform(other);
  auto gap = [&] {
    double g = 0.0;
    for (std::size_t i = 0; i < b.critic.params().size(); ++i)
      g = std::max(g, (b.target_critic.params()[i] - b.critic.params()[i]).cwiseAbs().maxCoeff());
    return g;
  };
  const double before = gap();
  SoftUpdate(b);
  EXPECT_NEAR(gap(), 0.99 * before, 1e-15);
  const auto same = b.critic.params();
  b.target_critic.params() = same;
  SoftUpdate(b);
  for (std::size_t i = 0; i < same.size(); ++i)
    EXPECT_TRUE(b.target_critic.params()[i].isApprox(same[i], 1e-15));
}

TEST(ActTest, ActionsBoundedAndNoiseClipped) {
  Rng rng(11);
  AgentBundle b = AgentBundle::Create(2, 3, Tiny(5.0), rng);
  for (int i = 0; i < 500; ++i) {
    const auto a = Act(b, std::vector<double>{UniformRange(rng, -3, 3), 1.0}, 5.0, rng);
    for (double x : a) {
      EXPECT_GE(x, -1.0);
      EXPECT_LE(x, 1.0);
    }
    const double n = ClippedNoise(5.0, 0.3, rng);
    EXPECT_LE(std::abs(n), 0.3);
  }
  EXPECT_EQ(ClippedNoise(0.0, 0.3, rng), 0.0);
  EXPECT_THROW(Act(b, std::vector<double>{1.0}, 0.0, rng), ShapeError);
}

TEST(ActTest, DeterministicWithoutNoise) {
  Rng rng(12);
  const AgentBundle b = AgentBundle::Create(2, 2, Tiny(), rng);
  const std::vector<double> s{0.3, -0.7};
  const auto a = Act(b, s, 0.0, rng);
  const auto ref = oracle::NetForward(b.actor, s);
  EXPECT_NEAR(a[0], ref[0], 1e-14);
  EXPECT_NEAR(a[1], ref[1], 1e-14);
}

}  // namespace
}  // namespace comsd
