#pragma once

// State-transition / skill encoders, the exponential-cosine similarity q, the
// NCE objective that trains both encoders, and the diversity reward read off
// the trained similarity.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "comsd/errors.hpp"
#include "comsd/ndmath.hpp"

namespace comsd {

inline constexpr double kNormFloor = 1e-8;

struct EncoderPair {
  DenseNet trunk;      // obs -> h -> h -> e, per state
  DenseNet predictor;  // 2e -> h -> h -> e, on concat(trunk(s_prev), trunk(s))
  DenseNet skill;      // d -> h -> h -> e
  double temperature = 0.5;

  static EncoderPair Create(int obs_dim, int skill_dim, int hidden, int embed,
                            double temperature, Rng& rng) {
    if (!(temperature > 0.0)) throw ConfigError("temperature", "must be > 0");
    const auto relu = Activation::kRelu;
    const auto id = Activation::kIdentity;
    EncoderPair p{DenseNet::Mlp(obs_dim, {hidden, hidden}, embed, relu, relu, id),
                  DenseNet::Mlp(2 * embed, {hidden, hidden}, embed, relu, relu, id),
                  DenseNet::Mlp(skill_dim, {hidden, hidden}, embed, relu, relu, id),
                  temperature};
    p.trunk.InitUniform(rng);
    p.predictor.InitUniform(rng);
    p.skill.InitUniform(rng);
    return p;
  }

  int embed_dim() const { return trunk.output_dim(); }
};

struct EncoderOptim {
  AdamState trunk, predictor, skill;

  EncoderOptim() = default;
  EncoderOptim(const EncoderPair& p, double lr)
      : trunk(p.trunk.params(), lr), predictor(p.predictor.params(), lr), skill(p.skill.params(), lr) {}
};

// Columns of `prev`/`cur` are consecutive observations (s_prev, s).
inline Matrix EncodeTransitions(const EncoderPair& p, const Matrix& prev, const Matrix& cur) {
  if (prev.rows() != cur.rows() || prev.cols() != cur.cols())
    throw ShapeError("encode_transition: s_prev and s differ in shape");
  const int e = p.embed_dim();
  Matrix joint(2 * e, prev.cols());
  joint.topRows(e) = Forward(p.trunk, prev);
  joint.bottomRows(e) = Forward(p.trunk, cur);
  return Forward(p.predictor, joint);
}

inline Vector EncodeTransition(const EncoderPair& p, std::span<const double> prev,
                               std::span<const double> cur) {
  if (prev.size() != cur.size()) throw ShapeError("encode_transition: s_prev and s differ in size");
  const auto n = static_cast<Eigen::Index>(prev.size());
  return EncodeTransitions(p, Eigen::Map<const Matrix>(prev.data(), n, 1),
                           Eigen::Map<const Matrix>(cur.data(), n, 1))
      .col(0);
}

inline Matrix EncodeSkills(const EncoderPair& p, const Matrix& skills) {
  return Forward(p.skill, skills);
}

inline double SimilarityQ(const Vector& u, const Vector& v, double temperature) {
  if (u.size() != v.size()) throw ShapeError("similarity_q: embedding sizes differ");
  const double nu = std::max(u.norm(), kNormFloor);
  const double nv = std::max(v.norm(), kNormFloor);
  return std::exp(u.dot(v) / (nu * nv * temperature));
}

namespace detail {

inline Matrix NormalizeColumns(const Matrix& m, Vector& norms) {
  norms = m.colwise().norm().transpose().cwiseMax(kNormFloor);
  Matrix out = m;
  out.array().rowwise() /= norms.transpose().array();
  return out;
}

// Gradient through x -> x / max(|x|, floor), column-wise.
inline Matrix NormalizeBackward(const Matrix& unit, const Vector& norms, const Matrix& d_unit,
                                const Matrix& raw) {
  Matrix out(unit.rows(), unit.cols());
  for (Eigen::Index c = 0; c < unit.cols(); ++c) {
    if (raw.col(c).norm() < kNormFloor) {
      out.col(c) = d_unit.col(c) / kNormFloor;
    } else {
      out.col(c) = (d_unit.col(c) - unit.col(c) * unit.col(c).dot(d_unit.col(c))) / norms(c);
    }
  }
  return out;
}

}  // namespace detail

// logits(j, i) = cos(u_j, v_i) / T, so q(tau_j, z_i) = exp(logits(j, i)).
inline Matrix SimilarityLogits(const Matrix& tau_embed, const Matrix& skill_embed,
                               double temperature) {
  if (tau_embed.rows() != skill_embed.rows())
    throw ShapeError("similarity: embedding sizes differ");
  Vector nu, nv;
  const Matrix u = detail::NormalizeColumns(tau_embed, nu);
  const Matrix v = detail::NormalizeColumns(skill_embed, nv);
  return (u.transpose() * v) / temperature;
}

// q(tau_i, z_i) for index-matched columns.
inline Vector PairedSimilarity(const Matrix& tau_embed, const Matrix& skill_embed,
                               double temperature) {
  if (tau_embed.rows() != skill_embed.rows() || tau_embed.cols() != skill_embed.cols())
    throw ShapeError("paired similarity: shape mismatch");
  Vector out(tau_embed.cols());
  for (Eigen::Index i = 0; i < tau_embed.cols(); ++i)
    out(i) = SimilarityQ(tau_embed.col(i), skill_embed.col(i), temperature);
  return out;
}

// Per-anchor terms L_i = log q(tau_i, z_i) - log(mean_j q(tau_j, z_i)).
inline Vector NceTerms(const Matrix& logits) {
  const Eigen::Index n = logits.cols();
  if (n < 2 || logits.rows() != n) throw ShapeError("nce: need a square batch of size >= 2");
  Vector terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.col(i).maxCoeff();
    const double lse = mx + std::log((logits.col(i).array() - mx).exp().sum());
    terms(i) = logits(i, i) - (lse - std::log(static_cast<double>(n)));
  }
  return terms;
}

struct NceResult {
  double objective = 0.0;  // mean_i L_i, to be maximized
  ParamSet trunk_grad;     // gradients of -objective
  ParamSet predictor_grad;
  ParamSet skill_grad;
};

inline NceResult NceLossAndGrad(const EncoderPair& p, const Matrix& prev, const Matrix& cur,
                                const Matrix& skills) {
  const Eigen::Index n = prev.cols();
  if (n < 2) throw ShapeError("nce: batch size must be >= 2");
  if (cur.cols() != n || skills.cols() != n || prev.rows() != cur.rows())
    throw ShapeError("nce: batch columns disagree");
  const int e = p.embed_dim();
  const double temp = p.temperature;

  ForwardCache c_prev, c_cur, c_pred, c_skill;
  Matrix joint(2 * e, n);
  joint.topRows(e) = Forward(p.trunk, prev, &c_prev);
  joint.bottomRows(e) = Forward(p.trunk, cur, &c_cur);
  const Matrix u_raw = Forward(p.predictor, joint, &c_pred);
  const Matrix v_raw = Forward(p.skill, skills, &c_skill);

  Vector nu, nv;
  const Matrix u = detail::NormalizeColumns(u_raw, nu);
  const Matrix v = detail::NormalizeColumns(v_raw, nv);
  const Matrix logits = (u.transpose() * v) / temp;

  NceResult r;
  r.objective = NceTerms(logits).mean();

  // d(-objective)/d logits(j,i) = (softmax_j(logits(:,i)) - delta_ij) / n
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.col(i).maxCoeff();
    Vector ex = (logits.col(i).array() - mx).exp();
    g.col(i) = ex / ex.sum();
    g(i, i) -= 1.0;
  }
  g /= static_cast<double>(n);

  const Matrix du_unit = (v * g.transpose()) / temp;
  const Matrix dv_unit = (u * g) / temp;
  const Matrix du = detail::NormalizeBackward(u, nu, du_unit, u_raw);
  const Matrix dv = detail::NormalizeBackward(v, nv, dv_unit, v_raw);

  r.trunk_grad = ZerosLike(p.trunk.params());
  r.predictor_grad = ZerosLike(p.predictor.params());
  r.skill_grad = ZerosLike(p.skill.params());
  const Matrix d_joint = Backward(p.predictor, c_pred, du, &r.predictor_grad);
  Backward(p.trunk, c_prev, d_joint.topRows(e), &r.trunk_grad);
  Backward(p.trunk, c_cur, d_joint.bottomRows(e), &r.trunk_grad);
  Backward(p.skill, c_skill, dv, &r.skill_grad);
  return r;
}

// One Adam step on both encoders; returns the objective before the step.
inline double NceStep(EncoderPair& p, EncoderOptim& opt, const Matrix& prev, const Matrix& cur,
                      const Matrix& skills) {
  NceResult r = NceLossAndGrad(p, prev, cur, skills);
  if (!std::isfinite(r.objective)) throw NumericError("nce: non-finite objective");
  AdamStep(p.trunk.params(), r.trunk_grad, opt.trunk);
  AdamStep(p.predictor.params(), r.predictor_grad, opt.predictor);
  AdamStep(p.skill.params(), r.skill_grad, opt.skill);
  return r.objective;
}

enum class DiversityForm { kQ, kLogQ };

// r_div,i = q(tau_i, z_i) (or its log); no gradients are taken.
inline Vector DiversityReward(const EncoderPair& p, const Matrix& prev, const Matrix& cur,
                              const Matrix& skills, DiversityForm form = DiversityForm::kQ) {
  const Vector q = PairedSimilarity(EncodeTransitions(p, prev, cur), EncodeSkills(p, skills),
                                    p.temperature);
  if (form == DiversityForm::kLogQ) return q.array().log();
  return q;
}

}  // namespace comsd
