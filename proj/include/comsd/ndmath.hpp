#pragma once

// Dense multilayer perceptrons with hand-written reverse mode and Adam.
//
// Tensors are column-major Eigen matrices; a batch is laid out one sample per
// column, so a layer computes  out = W * in + b  for all columns at once.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "comsd/errors.hpp"
#include "comsd/random.hpp"

namespace comsd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One tensor per parameter array. Gradients and optimizer moments use the same
// layout as the parameters they belong to.
using ParamSet = std::vector<Matrix>;

enum class Activation { kRelu, kTanh, kLayerNormTanh, kIdentity };

inline std::string ToString(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kLayerNormTanh: return "layernorm_tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline constexpr double kLayerNormEps = 1e-5;

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::kIdentity;
};

class DenseNet {
 public:
  DenseNet() = default;

  // `dims` has one more entry than `acts`. Parameters start at zero; call
  // InitUniform for the usual fan-in initialization.
  DenseNet(const std::vector<int>& dims, const std::vector<Activation>& acts) {
    if (dims.size() < 2 || acts.size() + 1 != dims.size())
      throw ShapeError("DenseNet: need dims.size() == acts.size() + 1 >= 2");
    for (std::size_t l = 0; l < acts.size(); ++l) {
      if (dims[l] <= 0 || dims[l + 1] <= 0)
        throw ShapeError("DenseNet: layer dims must be positive");
      if (acts[l] == Activation::kLayerNormTanh && l != 0)
        throw ShapeError("DenseNet: layernorm_tanh only allowed on the first layer");
      layers_.push_back({dims[l], dims[l + 1], acts[l]});
      offsets_.push_back(params_.size());
      params_.push_back(Matrix::Zero(dims[l + 1], dims[l]));
      params_.push_back(Matrix::Zero(dims[l + 1], 1));
      if (acts[l] == Activation::kLayerNormTanh) {
        params_.push_back(Matrix::Ones(dims[l + 1], 1));   // gain
        params_.push_back(Matrix::Zero(dims[l + 1], 1));   // offset
      }
    }
  }

  // Standard MLP: `hidden` widths between in and out; `first` is the
  // activation of the first hidden layer, `hidden_act` of the rest, `out_act`
  // of the final layer.
  static DenseNet Mlp(int in, const std::vector<int>& hidden, int out,
                      Activation first, Activation hidden_act, Activation out_act) {
    std::vector<int> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    std::vector<Activation> acts;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      if (l + 2 == dims.size()) acts.push_back(out_act);
      else acts.push_back(l == 0 ? first : hidden_act);
    }
    return DenseNet(dims, acts);
  }

  // W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); layer norm gain 1, offset 0.
  void InitUniform(Rng& rng) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layers_[l].in));
      for (Matrix* m : {&weight(l), &bias(l)})
        for (Eigen::Index i = 0; i < m->size(); ++i)
          m->data()[i] = UniformRange(rng, -bound, bound);
    }
  }

  std::size_t num_layers() const { return layers_.size(); }
  const LayerSpec& layer(std::size_t l) const { return layers_[l]; }
  int input_dim() const { return layers_.front().in; }
  int output_dim() const { return layers_.back().out; }

  Matrix& weight(std::size_t l) { return params_[offsets_[l]]; }
  const Matrix& weight(std::size_t l) const { return params_[offsets_[l]]; }
  Matrix& bias(std::size_t l) { return params_[offsets_[l] + 1]; }
  const Matrix& bias(std::size_t l) const { return params_[offsets_[l] + 1]; }
  const Matrix& ln_gain(std::size_t l) const { return params_[offsets_[l] + 2]; }
  const Matrix& ln_offset(std::size_t l) const { return params_[offsets_[l] + 3]; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  std::size_t param_offset(std::size_t l) const { return offsets_[l]; }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
  }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  ParamSet params_;
};

inline ParamSet ZerosLike(const ParamSet& ps) {
  ParamSet out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(Matrix::Zero(p.rows(), p.cols()));
  return out;
}

inline void SetZero(ParamSet& ps) {
  for (auto& p : ps) p.setZero();
}

inline bool AllFinite(const ParamSet& ps) {
  for (const auto& p : ps)
    if (!p.allFinite()) return false;
  return true;
}

// Intermediate values needed by Backward.
struct ForwardCache {
  std::vector<Matrix> inputs;   // input to each layer
  std::vector<Matrix> outputs;  // activation output of each layer
  std::vector<Matrix> normed;   // layer norm: normalized pre-activation
  std::vector<Vector> inv_std;  // layer norm: per-column 1/sigma
};

namespace detail {

inline void CheckInput(const DenseNet& net, const Matrix& x) {
  if (net.num_layers() == 0) throw ShapeError("forward: empty network");
  if (x.rows() != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(x.rows()) +
                     " rows, network expects " + std::to_string(net.input_dim()));
}

}  // namespace detail

inline Matrix Forward(const DenseNet& net, const Matrix& x, ForwardCache* cache) {
  detail::CheckInput(net, x);
  const std::size_t nl = net.num_layers();
  if (cache) {
    cache->inputs.assign(nl, Matrix());
    cache->outputs.assign(nl, Matrix());
    cache->normed.assign(nl, Matrix());
    cache->inv_std.assign(nl, Vector());
  }
  Matrix a = x;
  for (std::size_t l = 0; l < nl; ++l) {
    const LayerSpec& spec = net.layer(l);
    Matrix z = net.weight(l) * a;
    z.colwise() += net.bias(l).col(0);
    if (cache) cache->inputs[l] = std::move(a);
    switch (spec.act) {
      case Activation::kRelu:
        a = z.cwiseMax(0.0);
        break;
      case Activation::kTanh:
        a = z.array().tanh();
        break;
      case Activation::kIdentity:
        a = std::move(z);
        break;
      case Activation::kLayerNormTanh: {
        const Eigen::RowVectorXd mean = z.colwise().mean();
        z.rowwise() -= mean;
        const Eigen::RowVectorXd var = z.array().square().colwise().mean();
        const Eigen::RowVectorXd inv = (var.array() + kLayerNormEps).rsqrt();
        z.array().rowwise() *= inv.array();
        Matrix y = (z.array().colwise() * net.ln_gain(l).col(0).array()).matrix();
        y.colwise() += net.ln_offset(l).col(0);
        a = y.array().tanh();
        if (cache) {
          cache->normed[l] = std::move(z);
          cache->inv_std[l] = inv.transpose();
        }
        break;
      }
    }
    if (cache) cache->outputs[l] = a;
  }
  return a;
}

inline Matrix Forward(const DenseNet& net, const Matrix& x) {
  return Forward(net, x, nullptr);
}

inline Vector Forward(const DenseNet& net, std::span<const double> x) {
  Eigen::Map<const Matrix> col(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return Forward(net, Matrix(col), nullptr).col(0);
}

// Reverse pass. `upstream` is dLoss/dOutput (same shape as the forward
// output). Parameter gradients are ADDED into `grads` when it is non-null
// (so a net evaluated twice in one loss can accumulate); the input gradient is
// returned.
inline Matrix Backward(const DenseNet& net, const ForwardCache& cache,
                       const Matrix& upstream, ParamSet* grads) {
  const std::size_t nl = net.num_layers();
  if (cache.outputs.size() != nl)
    throw ShapeError("backward: cache does not belong to this network");
  const Matrix& out = cache.outputs.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw ShapeError("backward: upstream gradient shape mismatch");
  if (grads && grads->size() != net.params().size())
    throw ShapeError("backward: gradient set does not match parameters");

  Matrix delta = upstream;
  for (std::size_t l = nl; l-- > 0;) {
    const LayerSpec& spec = net.layer(l);
    const Matrix& y = cache.outputs[l];
    const std::size_t off = net.param_offset(l);
    switch (spec.act) {
      case Activation::kRelu:
        delta = (y.array() > 0.0).select(delta, 0.0);
        break;
      case Activation::kTanh:
        delta.array() *= 1.0 - y.array().square();
        break;
      case Activation::kIdentity:
        break;
      case Activation::kLayerNormTanh: {
        delta.array() *= 1.0 - y.array().square();  // through tanh
        const Matrix& xhat = cache.normed[l];
        if (grads) {
          (*grads)[off + 2].col(0) += (delta.array() * xhat.array()).rowwise().sum().matrix();
          (*grads)[off + 3].col(0) += delta.rowwise().sum();
        }
        Matrix dxhat = (delta.array().colwise() * net.ln_gain(l).col(0).array()).matrix();
        const Eigen::RowVectorXd mean_d = dxhat.colwise().mean();
        const Eigen::RowVectorXd mean_dx =
            (dxhat.array() * xhat.array()).colwise().mean();
        Matrix dz = dxhat;
        dz.rowwise() -= mean_d;
        dz.array() -= xhat.array().rowwise() * mean_dx.array();
        dz.array().rowwise() *= cache.inv_std[l].transpose().array();
        delta = std::move(dz);
        break;
      }
    }
    if (grads) {
      (*grads)[off].noalias() += delta * cache.inputs[l].transpose();
      (*grads)[off + 1].col(0) += delta.rowwise().sum();
    }
    Matrix next = net.weight(l).transpose() * delta;
    delta = std::move(next);
  }
  return delta;
}

struct Gradients {
  ParamSet params;
  Matrix input;
};

inline Gradients Backward(const DenseNet& net, const Matrix& x, const Matrix& upstream) {
  ForwardCache cache;
  Forward(net, x, &cache);
  Gradients g{ZerosLike(net.params()), Matrix()};
  g.input = Backward(net, cache, upstream, &g.params);
  return g;
}

// Adam with bias correction.
struct AdamState {
  ParamSet first_moment;
  ParamSet second_moment;
  long step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(const ParamSet& params, double lr)
      : first_moment(ZerosLike(params)),
        second_moment(ZerosLike(params)),
        learning_rate(lr) {}
};

// Throws NumericError (leaving params and state untouched) if any gradient
// component is non-finite.
inline void AdamStep(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        params[i].rows() != state.first_moment[i].rows() ||
        params[i].cols() != state.first_moment[i].cols())
      throw ShapeError("adam: tensor " + std::to_string(i) + " shape mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite())
      throw NumericError("adam: non-finite gradient in tensor " + std::to_string(i) +
                         " at step " + std::to_string(state.step_count));
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    const auto g = grads[i].array();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    params[i].array() -=
        state.learning_rate * (m / c1) / ((v / c2).sqrt() + state.epsilon);
  }
}

// Elementwise target <- (1 - rate) * target + rate * source.
inline void LerpInto(ParamSet& target, const ParamSet& source, double rate) {
  if (target.size() != source.size()) throw ShapeError("lerp: parameter count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i)
    target[i] = (1.0 - rate) * target[i] + rate * source[i];
}

}  // namespace comsd
