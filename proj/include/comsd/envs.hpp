#pragma once

// Reward-free, fixed-horizon continuous control environments and the
// extrinsic-reward tasks defined on top of them.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "comsd/errors.hpp"
#include "comsd/random.hpp"

namespace comsd {

inline constexpr int kEpisodeLength = 200;

struct EnvState {
  std::vector<double> observation;
  int step_index = 0;
};

inline double WrapAngle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;  // (-pi, pi]
}

class Env {
 public:
  virtual ~Env() = default;
  virtual std::string_view id() const = 0;
  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  int horizon() const { return kEpisodeLength; }
  // observation indices that hold a planar position, and their bounds
  virtual std::array<int, 2> position_dims() const = 0;
  virtual double position_bound() const = 0;

  // `noise` toggles the uniform +-0.05 perturbation of the canonical pose.
  virtual EnvState Reset(Rng& rng, bool noise = true) const = 0;

  EnvState Step(const EnvState& state, std::span<const double> action) const {
    if (static_cast<int>(action.size()) != action_dim())
      throw ShapeError(std::string(id()) + ": action dim " + std::to_string(action.size()) +
                       " != " + std::to_string(action_dim()));
    if (static_cast<int>(state.observation.size()) != obs_dim())
      throw ShapeError(std::string(id()) + ": observation dim mismatch");
    if (state.step_index >= horizon())
      throw std::logic_error(std::string(id()) + ": step past end of episode");
    std::vector<double> a(action.begin(), action.end());
    for (double& x : a) {
      if (!std::isfinite(x)) throw NumericError(std::string(id()) + ": non-finite action");
      x = std::clamp(x, -1.0, 1.0);
    }
    EnvState next{Dynamics(state.observation, a), state.step_index + 1};
    return next;
  }

  static bool Done(const EnvState& s) { return s.step_index >= kEpisodeLength; }

 protected:
  virtual std::vector<double> Dynamics(const std::vector<double>& obs,
                                       const std::vector<double>& action) const = 0;
};

// Point mass in a four-room layout on [-1,1]^2.
// obs = (x, y, vx, vy). The interior walls lie on the axes; each wall arm has
// a doorway of width kDoorWidth centered at distance 0.5 from the origin, and
// a central opening of half-width kHubHalfWidth joins the four rooms where
// the walls cross (the start pose sits there).
class PointMassRooms final : public Env {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kDamping = 0.95;
  static constexpr double kVelocityBound = 2.0;
  static constexpr double kDoorWidth = 0.3;
  static constexpr double kDoorCenter = 0.5;
  static constexpr double kHubHalfWidth = 0.15;
  static constexpr double kWallMargin = 1e-3;

  std::string_view id() const override { return "pointmass"; }
  int obs_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  std::array<int, 2> position_dims() const override { return {0, 1}; }
  double position_bound() const override { return 1.0; }

  EnvState Reset(Rng& rng, bool noise = true) const override {
    EnvState s{{0.0, 0.0, 0.0, 0.0}, 0};
    if (noise) {
      s.observation[0] = UniformRange(rng, -0.05, 0.05);
      s.observation[1] = UniformRange(rng, -0.05, 0.05);
    }
    return s;
  }

  // true if the interior wall on the line {coord = 0} is open at `along`
  static bool Passable(double along) {
    const double d = std::abs(along);
    return d < kHubHalfWidth || std::abs(d - kDoorCenter) < 0.5 * kDoorWidth;
  }

 protected:
  std::vector<double> Dynamics(const std::vector<double>& obs,
                               const std::vector<double>& a) const override {
    double x = obs[0], y = obs[1];
    double vx = (obs[2] + a[0] * kDt) * kDamping;
    double vy = (obs[3] + a[1] * kDt) * kDamping;
    vx = std::clamp(vx, -kVelocityBound, kVelocityBound);
    vy = std::clamp(vy, -kVelocityBound, kVelocityBound);
    double nx = x + vx * kDt;
    double ny = y + vy * kDt;

    // vertical wall x = 0
    if ((x < 0.0) != (nx < 0.0) && x != 0.0) {
      const double t = x / (x - nx);
      const double cross_y = y + t * (ny - y);
      if (!Passable(cross_y)) {
        nx = x < 0.0 ? -kWallMargin : kWallMargin;
        vx = 0.0;
      }
    }
    // horizontal wall y = 0
    if ((y < 0.0) != (ny < 0.0) && y != 0.0) {
      const double t = y / (y - ny);
      const double cross_x = x + t * (nx - x);
      if (!Passable(cross_x)) {
        ny = y < 0.0 ? -kWallMargin : kWallMargin;
        vy = 0.0;
      }
    }
    // outer walls
    if (nx > 1.0 || nx < -1.0) {
      nx = std::clamp(nx, -1.0, 1.0);
      vx = 0.0;
    }
    if (ny > 1.0 || ny < -1.0) {
      ny = std::clamp(ny, -1.0, 1.0);
      vy = 0.0;
    }
    return {nx, ny, vx, vy};
  }
};

// Three-link planar arm with total length 1 (links of 1/3).
// obs = (theta1..3 wrapped to (-pi,pi], omega1..3, fingertip x, y).
class PlanarArm final : public Env {
 public:
  static constexpr double kDt = 0.02;
  static constexpr double kFriction = 0.5;
  static constexpr double kGain = 4.0;
  static constexpr double kMaxOmega = 8.0;
  static constexpr double kLinkLength = 1.0 / 3.0;

  std::string_view id() const override { return "planararm"; }
  int obs_dim() const override { return 8; }
  int action_dim() const override { return 3; }
  std::array<int, 2> position_dims() const override { return {6, 7}; }
  double position_bound() const override { return 1.0; }

  static std::array<double, 2> Fingertip(double t1, double t2, double t3) {
    const double a1 = t1, a2 = t1 + t2, a3 = t1 + t2 + t3;
    return {kLinkLength * (std::cos(a1) + std::cos(a2) + std::cos(a3)),
            kLinkLength * (std::sin(a1) + std::sin(a2) + std::sin(a3))};
  }

  EnvState Reset(Rng& rng, bool noise = true) const override {
    std::array<double, 3> th{0.0, 0.0, 0.0};
    if (noise)
      for (double& t : th) t = UniformRange(rng, -0.05, 0.05);
    const auto tip = Fingertip(th[0], th[1], th[2]);
    return {{th[0], th[1], th[2], 0.0, 0.0, 0.0, tip[0], tip[1]}, 0};
  }

 protected:
  std::vector<double> Dynamics(const std::vector<double>& obs,
                               const std::vector<double>& a) const override {
    std::vector<double> out(8);
    for (int j = 0; j < 3; ++j) {
      double w = (obs[3 + j] + kGain * a[j] * kDt) * (1.0 - kFriction * kDt);
      w = std::clamp(w, -kMaxOmega, kMaxOmega);
      out[3 + j] = w;
      out[j] = WrapAngle(obs[j] + w * kDt);
    }
    const auto tip = Fingertip(out[0], out[1], out[2]);
    out[6] = tip[0];
    out[7] = tip[1];
    return out;
  }
};

inline std::unique_ptr<Env> MakeEnv(std::string_view env_id) {
  if (env_id == "pointmass") return std::make_unique<PointMassRooms>();
  if (env_id == "planararm") return std::make_unique<PlanarArm>();
  throw std::invalid_argument("unknown env_id '" + std::string(env_id) + "'");
}

inline const std::vector<std::string>& EnvIds() {
  static const std::vector<std::string> ids{"pointmass", "planararm"};
  return ids;
}

// ----- extrinsic tasks -----

struct TaskSpec {
  std::string env_id;
  std::string task_id;
};

inline const std::vector<std::string>& TaskIds(std::string_view env_id) {
  static const std::vector<std::string> point{"reach_ne", "reach_sw", "run", "stay_center"};
  static const std::vector<std::string> arm{"reach_a", "reach_b", "spin", "hold_posture"};
  if (env_id == "pointmass") return point;
  if (env_id == "planararm") return arm;
  throw std::invalid_argument("unknown env_id '" + std::string(env_id) + "'");
}

inline TaskSpec MakeTask(std::string_view env_id, std::string_view task_id) {
  const auto& ids = TaskIds(env_id);
  if (std::find(ids.begin(), ids.end(), task_id) == ids.end())
    throw std::invalid_argument("task '" + std::string(task_id) + "' does not belong to env '" +
                                std::string(env_id) + "'");
  return {std::string(env_id), std::string(task_id)};
}

namespace detail {

// 1 at the goal, falling linearly to 0 at distance 0.5
inline double ReachShaping(double dist) { return std::max(0.0, 1.0 - dist / 0.5); }

inline std::array<double, 2> ArmTarget(double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  return {0.9 * std::cos(r), 0.9 * std::sin(r)};
}

}  // namespace detail

inline double ExtrinsicReward(const TaskSpec& task, std::span<const double> obs,
                              std::span<const double> /*action*/) {
  if (task.env_id == "pointmass") {
    if (obs.size() != 4) throw ShapeError("pointmass task: observation dim mismatch");
    const double x = obs[0], y = obs[1];
    if (task.task_id == "reach_ne") return detail::ReachShaping(std::hypot(x - 0.8, y - 0.8));
    if (task.task_id == "reach_sw") return detail::ReachShaping(std::hypot(x + 0.8, y + 0.8));
    if (task.task_id == "run") return std::min(1.0, std::hypot(obs[2], obs[3]) / 1.5);
    if (task.task_id == "stay_center") return std::hypot(x, y) < 0.2 ? 1.0 : 0.0;
  } else if (task.env_id == "planararm") {
    if (obs.size() != 8) throw ShapeError("planararm task: observation dim mismatch");
    if (task.task_id == "reach_a" || task.task_id == "reach_b") {
      const auto t = detail::ArmTarget(task.task_id == "reach_a" ? 45.0 : 200.0);
      return detail::ReachShaping(std::hypot(obs[6] - t[0], obs[7] - t[1]));
    }
    if (task.task_id == "spin") return std::min(1.0, std::max(0.0, obs[3]) / 6.0);
    if (task.task_id == "hold_posture") {
      const double target[3] = {std::numbers::pi / 2.0, 0.0, 0.0};
      for (int j = 0; j < 3; ++j)
        if (std::abs(WrapAngle(obs[j] - target[j])) >= 0.15) return 0.0;
      return 1.0;
    }
  }
  throw std::invalid_argument("task '" + task.task_id + "' does not belong to env '" +
                              task.env_id + "'");
}

}  // namespace comsd
