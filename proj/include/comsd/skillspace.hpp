#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "comsd/errors.hpp"
#include "comsd/random.hpp"

namespace comsd {

using SkillVector = std::vector<double>;

// Weighting of the diversity term as a clamped-linear function of the skill's
// first coordinate.
struct SmwParams {
  double w_high = 2.0;
  double w_low = 0.0;
  double f_high = 0.75;
  double f_low = 0.25;

  void Validate() const {
    if (!(w_high >= w_low)) throw ConfigError("smw.w_high", "must be >= smw.w_low");
    if (!(f_high > f_low)) throw ConfigError("smw.f_high", "must be > smw.f_low");
  }

  // presets from the reference hyper-parameter tables
  static SmwParams Walker() { return {2.0, 0.0, 1.0, 0.0}; }
  static SmwParams Quadruped() { return {2.0, 0.0, 1.0, 0.0}; }
  static SmwParams Hopper() { return {2.0, 0.0, 2.0 / 3.0, 1.0 / 3.0}; }
  static SmwParams Cheetah() { return {2.0, 0.0, 2.0 / 3.0, 1.0 / 3.0}; }
  static SmwParams Desk() { return {}; }
};

inline SkillVector SampleSkill(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("skill dimension must be >= 1");
  SkillVector z(static_cast<std::size_t>(d));
  for (double& v : z) v = Uniform01(rng);
  return z;
}

inline double Flag(std::span<const double> z) {
  if (z.empty()) throw ShapeError("flag: empty skill vector");
  return z[0];
}

inline double SmwBeta(double flag, const SmwParams& p) {
  const double slope = (p.w_high - p.w_low) / (p.f_high - p.f_low);
  const double raw = slope * (flag - p.f_high) + p.w_high;
  return std::clamp(raw, p.w_low, p.w_high);
}

inline double SmwBeta(std::span<const double> z, const SmwParams& p) {
  return SmwBeta(Flag(z), p);
}

// Fixed skill the finetuning protocol adapts: flag 0, all else 0.5.
inline SkillVector FinetuneSkill(int d) {
  SkillVector z(static_cast<std::size_t>(d), 0.5);
  z[0] = 0.0;
  return z;
}

}  // namespace comsd
