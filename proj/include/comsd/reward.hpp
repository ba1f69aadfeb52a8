#pragma once

// Composite intrinsic reward:  r = r_exp + alpha * beta(z) * r_div,
// each component first divided by a running RMS scale.

#include <cmath>
#include <stdexcept>
#include <string>

#include "comsd/errors.hpp"
#include "comsd/ndmath.hpp"
#include "comsd/skillspace.hpp"

namespace comsd {

enum class RewardMode { kComsd, kNoSmw, kExplorationOnly, kDiversityOnly };

inline std::string ToString(RewardMode m) {
  switch (m) {
    case RewardMode::kComsd: return "comsd";
    case RewardMode::kNoSmw: return "no_smw";
    case RewardMode::kExplorationOnly: return "exploration_only";
    case RewardMode::kDiversityOnly: return "diversity_only";
  }
  return "?";
}

inline RewardMode ParseRewardMode(const std::string& s) {
  if (s == "comsd") return RewardMode::kComsd;
  if (s == "no_smw") return RewardMode::kNoSmw;
  if (s == "exploration_only") return RewardMode::kExplorationOnly;
  if (s == "diversity_only") return RewardMode::kDiversityOnly;
  throw ConfigError("mode", "unknown reward mode '" + s + "'");
}

// Exponential moving average of the batch mean of r^2, bias corrected.
class RunningScale {
 public:
  explicit RunningScale(double decay = 0.999) : decay_(decay) {}

  void Update(const Vector& r) {
    if (r.size() == 0) return;
    ema_ = decay_ * ema_ + (1.0 - decay_) * r.array().square().mean();
    count_ += 1;
  }

  // root of the bias-corrected EMA; 1 before the first update
  double scale() const {
    if (count_ == 0) return 1.0;
    const double corrected = ema_ / (1.0 - std::pow(decay_, static_cast<double>(count_)));
    return std::max(std::sqrt(corrected), 1e-8);
  }

  long count() const { return count_; }

 private:
  double decay_;
  double ema_ = 0.0;
  long count_ = 0;
};

struct RewardConfig {
  double alpha = 0.25;
  SmwParams smw;
  RewardMode mode = RewardMode::kComsd;
  bool normalize = true;
  double scale_decay = 0.999;

  void Validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha", "must be >= 0");
    smw.Validate();
  }
};

class RewardComposer {
 public:
  explicit RewardComposer(RewardConfig cfg)
      : cfg_(std::move(cfg)), exp_scale_(cfg_.scale_decay), div_scale_(cfg_.scale_decay) {
    cfg_.Validate();
  }

  double Beta(double flag) const {
    switch (cfg_.mode) {
      case RewardMode::kNoSmw: return 1.0;
      case RewardMode::kExplorationOnly: return 0.0;
      default: return SmwBeta(flag, cfg_.smw);
    }
  }

  // `skills` holds one skill per column, aligned with the reward entries.
  Vector Compose(const Vector& r_exp, const Vector& r_div, const Matrix& skills) {
    if (r_exp.size() != r_div.size() || skills.cols() != r_exp.size())
      throw ShapeError("compose: reward/skill lengths differ");
    if (!r_exp.allFinite() || !r_div.allFinite())
      throw NumericError("compose: non-finite component reward");
    double s_exp = 1.0, s_div = 1.0;
    if (cfg_.normalize) {
      exp_scale_.Update(r_exp);
      div_scale_.Update(r_div);
      s_exp = exp_scale_.scale();
      s_div = div_scale_.scale();
    }
    const double alpha = cfg_.mode == RewardMode::kExplorationOnly ? 0.0 : cfg_.alpha;
    const double w_exp = cfg_.mode == RewardMode::kDiversityOnly ? 0.0 : 1.0;
    Vector out(r_exp.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double beta = Beta(skills(0, i));
      out(i) = w_exp * r_exp(i) / s_exp + alpha * beta * r_div(i) / s_div;
    }
    if (!out.allFinite()) throw NumericError("compose: non-finite intrinsic reward");
    return out;
  }

  const RewardConfig& config() const { return cfg_; }
  const RunningScale& exploration_scale() const { return exp_scale_; }
  const RunningScale& diversity_scale() const { return div_scale_; }

 private:
  RewardConfig cfg_;
  RunningScale exp_scale_;
  RunningScale div_scale_;
};

}  // namespace comsd
