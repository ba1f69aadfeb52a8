#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "comsd/errors.hpp"
#include "comsd/random.hpp"

namespace comsd {

// One environment step. The contrastive side uses the state transition
// tau = (obs, next_obs).
struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  std::vector<double> skill;
  double extrinsic_reward = 0.0;
  std::vector<double> next_obs;
  bool episode_end = false;  // next_obs is the last state of its episode
};

struct NStepSample {
  std::size_t start = 0;  // logical index of the first record
  int n_effective = 0;
  double discounted_return = 0.0;  // extrinsic
  double bootstrap_discount = 0.0;  // gamma^n_effective
};

class TransitionStore {
 public:
  TransitionStore(std::size_t capacity, int obs_dim, int action_dim, int skill_dim)
      : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim), skill_dim_(skill_dim) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    ring_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void Push(Transition t) {
    if (static_cast<int>(t.obs.size()) != obs_dim_ ||
        static_cast<int>(t.next_obs.size()) != obs_dim_ ||
        static_cast<int>(t.action.size()) != action_dim_ ||
        static_cast<int>(t.skill.size()) != skill_dim_)
      throw ShapeError("replay push: record shape does not match store");
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(t));
    } else {
      ring_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }

  // logical index 0 is the oldest record
  const Transition& at(std::size_t i) const { return ring_[(head_ + i) % ring_.size()]; }

  // Window [start, start + n_eff): stops after a record marked episode_end or
  // at the newest record, whichever comes first.
  NStepSample Assemble(std::size_t start, int n, double gamma) const {
    if (start >= size()) throw std::out_of_range("replay: window start out of range");
    NStepSample s;
    s.start = start;
    double discount = 1.0;
    for (int m = 0; m < n; ++m) {
      const std::size_t idx = start + static_cast<std::size_t>(m);
      if (idx >= size()) break;
      const Transition& t = at(idx);
      s.discounted_return += discount * t.extrinsic_reward;
      discount *= gamma;
      s.n_effective += 1;
      if (t.episode_end) break;
    }
    s.bootstrap_discount = discount;
    return s;
  }

  // last state of the window
  const std::vector<double>& AfterWindow(const NStepSample& s) const {
    return at(s.start + static_cast<std::size_t>(s.n_effective) - 1).next_obs;
  }

  std::vector<NStepSample> SampleNStep(std::size_t batch_size, int n, double gamma,
                                       Rng& rng) const {
    if (n < 1) throw std::invalid_argument("replay: n must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("replay: batch_size must be >= 1");
    if (size() < static_cast<std::size_t>(n) + 1)
      throw InsufficientDataError("replay holds " + std::to_string(size()) +
                                  " records; collect more seed frames");
    std::vector<NStepSample> out;
    out.reserve(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
      const auto start = static_cast<std::size_t>(Uniform01(rng) * static_cast<double>(size()));
      out.push_back(Assemble(std::min(start, size() - 1), n, gamma));
    }
    return out;
  }

 private:
  std::size_t capacity_;
  int obs_dim_;
  int action_dim_;
  int skill_dim_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;  // oldest record once the ring is full
};

}  // namespace comsd
