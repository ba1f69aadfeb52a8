#pragma once

// Deterministic policy gradient learner. The actor and critic both see the
// "state" input, which is the observation with any conditioning (skill)
// already concatenated below it.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "comsd/errors.hpp"
#include "comsd/ndmath.hpp"
#include "comsd/random.hpp"

namespace comsd {

struct DdpgConfig {
  int hidden = 256;
  double learning_rate = 1e-4;
  double stddev = 0.2;
  double stddev_clip = 0.3;
  double target_rate = 0.01;
};

struct AgentBundle {
  DenseNet actor;
  DenseNet critic;
  DenseNet target_critic;
  AdamState actor_opt;
  AdamState critic_opt;
  DdpgConfig cfg;

  static AgentBundle Create(int state_dim, int action_dim, const DdpgConfig& cfg, Rng& rng) {
    const auto ln = Activation::kLayerNormTanh;
    const auto relu = Activation::kRelu;
    AgentBundle b;
    b.cfg = cfg;
    b.actor = DenseNet::Mlp(state_dim, {cfg.hidden, cfg.hidden}, action_dim, ln, relu,
                            Activation::kTanh);
    b.critic = DenseNet::Mlp(state_dim + action_dim, {cfg.hidden, cfg.hidden}, 1, ln, relu,
                             Activation::kIdentity);
    b.actor.InitUniform(rng);
    b.critic.InitUniform(rng);
    b.target_critic = b.critic;
    b.actor_opt = AdamState(b.actor.params(), cfg.learning_rate);
    b.critic_opt = AdamState(b.critic.params(), cfg.learning_rate);
    return b;
  }

  int state_dim() const { return actor.input_dim(); }
  int action_dim() const { return actor.output_dim(); }
};

struct DdpgBatch {
  Matrix state;        // state_dim x N
  Matrix action;       // action_dim x N
  Vector ret;          // n-step discounted reward sum
  Matrix next_state;   // state after the n-step window
  Vector discount;     // gamma^n_effective
};

// Truncated Gaussian exploration noise: clip(N(0, stddev^2), +-clip).
inline double ClippedNoise(double stddev, double clip, Rng& rng) {
  if (stddev <= 0.0) return 0.0;
  return std::clamp(stddev * StandardNormal(rng), -clip, clip);
}

inline std::vector<double> Act(const AgentBundle& b, std::span<const double> state,
                               double stddev, Rng& rng) {
  if (static_cast<int>(state.size()) != b.state_dim())
    throw ShapeError("act: state dim mismatch");
  const Vector mu = Forward(b.actor, state);
  std::vector<double> a(static_cast<std::size_t>(mu.size()));
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (stddev <= 0.0) {
      a[static_cast<std::size_t>(i)] = mu(i);
    } else {
      a[static_cast<std::size_t>(i)] =
          std::clamp(mu(i) + ClippedNoise(stddev, b.cfg.stddev_clip, rng), -1.0, 1.0);
    }
  }
  return a;
}

inline Matrix Stack(const Matrix& top, const Matrix& bottom) {
  Matrix m(top.rows() + bottom.rows(), top.cols());
  m.topRows(top.rows()) = top;
  m.bottomRows(bottom.rows()) = bottom;
  return m;
}

// TD target y = G + gamma^n * Q_target(s', clip(actor(s') + noise)).
inline Vector CriticTarget(const AgentBundle& b, const DdpgBatch& batch, Rng& rng) {
  Matrix next_a = Forward(b.actor, batch.next_state);
  if (b.cfg.stddev > 0.0) {
    for (Eigen::Index i = 0; i < next_a.size(); ++i)
      next_a.data()[i] = std::clamp(
          next_a.data()[i] + ClippedNoise(b.cfg.stddev, b.cfg.stddev_clip, rng), -1.0, 1.0);
  }
  const Matrix q_next = Forward(b.target_critic, Stack(batch.next_state, next_a));
  Vector y = batch.ret + batch.discount.cwiseProduct(q_next.row(0).transpose());
  if (!y.allFinite()) throw NumericError("ddpg: non-finite critic target");
  return y;
}

struct LossAndGrad {
  double loss = 0.0;
  ParamSet grad;
};

// mean (Q(s,a) - y)^2 and its gradient w.r.t. the online critic
inline LossAndGrad CriticLossAndGrad(const DenseNet& critic, const DdpgBatch& batch,
                                     const Vector& target) {
  const auto n = static_cast<double>(batch.state.cols());
  ForwardCache cache;
  const Matrix q = Forward(critic, Stack(batch.state, batch.action), &cache);
  const Eigen::RowVectorXd diff = q.row(0) - target.transpose();
  LossAndGrad r;
  r.loss = diff.squaredNorm() / n;
  r.grad = ZerosLike(critic.params());
  Backward(critic, cache, Matrix(2.0 * diff / n), &r.grad);
  return r;
}

// -mean Q(s, actor(s)) and its gradient w.r.t. the actor only
inline LossAndGrad ActorLossAndGrad(const DenseNet& actor, const DenseNet& critic,
                                    const Matrix& state) {
  const auto n = static_cast<double>(state.cols());
  ForwardCache ca, cc;
  const Matrix a = Forward(actor, state, &ca);
  const Matrix q = Forward(critic, Stack(state, a), &cc);
  LossAndGrad r;
  r.loss = -q.mean();
  const Matrix up = Matrix::Constant(1, state.cols(), -1.0 / n);
  const Matrix d_in = Backward(critic, cc, up, nullptr);
  r.grad = ZerosLike(actor.params());
  Backward(actor, ca, d_in.bottomRows(a.rows()), &r.grad);
  return r;
}

inline double UpdateCritic(AgentBundle& b, const DdpgBatch& batch, Rng& rng) {
  const Vector y = CriticTarget(b, batch, rng);
  LossAndGrad r = CriticLossAndGrad(b.critic, batch, y);
  if (!std::isfinite(r.loss)) throw NumericError("ddpg: non-finite critic loss");
  AdamStep(b.critic.params(), r.grad, b.critic_opt);
  return r.loss;
}

inline double UpdateActor(AgentBundle& b, const DdpgBatch& batch) {
  LossAndGrad r = ActorLossAndGrad(b.actor, b.critic, batch.state);
  if (!std::isfinite(r.loss)) throw NumericError("ddpg: non-finite actor loss");
  AdamStep(b.actor.params(), r.grad, b.actor_opt);
  return r.loss;
}

inline void SoftUpdate(AgentBundle& b) {
  LerpInto(b.target_critic.params(), b.critic.params(), b.cfg.target_rate);
}

}  // namespace comsd
