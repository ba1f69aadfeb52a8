#pragma once

// Run configuration: every tunable in one flat struct, JSON in and out,
// with a desk-scale and a reference-scale preset.

#include <cstdint>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "comsd/contrastive.hpp"
#include "comsd/ddpg.hpp"
#include "comsd/entropy.hpp"
#include "comsd/envs.hpp"
#include "comsd/errors.hpp"
#include "comsd/reward.hpp"
#include "comsd/skillspace.hpp"

namespace comsd {

using Json = nlohmann::json;

struct Config {
  std::string profile = "desk";
  std::string env_id = "pointmass";
  std::string task = "reach_ne";
  std::uint64_t seed = 0;

  // skills and intrinsic reward
  int skill_dim = 8;
  int skill_every = 50;
  double alpha = 0.25;
  SmwParams smw = SmwParams::Desk();
  std::string mode = "comsd";
  bool normalize = true;
  double scale_decay = 0.999;
  double temperature = 0.5;
  std::string diversity_form = "q";
  int knn_k = 12;
  double knn_stabilizer = 1.0;

  // networks and optimization
  int hidden = 256;
  int embed = 32;
  int batch_size = 256;
  double learning_rate = 1e-4;
  double finetune_learning_rate = 1e-4;
  std::int64_t replay_capacity = 1000000;
  int seed_frames = 4000;
  int n_step = 3;
  double gamma = 0.99;
  int update_every = 2;
  double stddev = 0.2;
  double stddev_clip = 0.3;
  double target_rate = 0.01;

  // phases
  std::int64_t pretrain_steps = 100000;
  std::int64_t finetune_steps = 100000;
  std::int64_t finetune_choice_steps = 4000;
  std::int64_t combine_steps = 50000;
  int combine_hold = 1;
  double meta_stddev = 0.2;
  double meta_stddev_clip = 0.3;
  double meta_eval_stddev = 0.2;
  double pretrained_eval_stddev = 0.0;
  std::int64_t eval_every = 10000;
  int eval_episodes = 10;
  std::int64_t log_every = 5000;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only

  // analysis
  int akd_k = 4;
  int ms_k = 3;
  int rollout_episodes = 5;
  int coverage_bins = 20;

  static Config Desk() { return Config{}; }

  static Config Full() {
    Config c;
    c.profile = "full";
    c.skill_dim = 64;
    c.hidden = 1024;
    c.embed = 64;
    c.batch_size = 1024;
    c.smw = SmwParams::Walker();
    c.pretrain_steps = 2000000;
    c.combine_steps = 2000000;
    return c;
  }

  static Config FromProfile(const std::string& name) {
    if (name == "desk") return Desk();
    if (name == "full") return Full();
    throw ConfigError("profile", "unknown profile '" + name + "' (expected desk|full)");
  }

  void Validate() const {
    auto require = [](bool ok, const char* field, const char* msg) {
      if (!ok) throw ConfigError(field, msg);
    };
    MakeEnvChecked();
    require(skill_dim >= 1, "skill_dim", "must be >= 1");
    require(skill_every >= 1, "skill_every", "must be >= 1");
    require(alpha >= 0.0, "alpha", "must be >= 0");
    smw.Validate();
    ParseRewardMode(mode);
    require(diversity_form == "q" || diversity_form == "log_q", "diversity_form",
            "must be q or log_q");
    require(scale_decay > 0.0 && scale_decay < 1.0, "scale_decay", "must be in (0,1)");
    require(temperature > 0.0, "temperature", "must be > 0");
    require(knn_k >= 1, "knn_k", "must be >= 1");
    require(knn_k < batch_size, "knn_k", "must be < batch_size");
    require(knn_stabilizer > 0.0, "knn_stabilizer", "must be > 0");
    require(hidden >= 1, "hidden", "must be >= 1");
    require(embed >= 1, "embed", "must be >= 1");
    require(batch_size >= 2, "batch_size", "must be >= 2");
    require(learning_rate > 0.0, "learning_rate", "must be > 0");
    require(finetune_learning_rate > 0.0, "finetune_learning_rate", "must be > 0");
    require(replay_capacity >= 1, "replay_capacity", "must be >= 1");
    require(seed_frames >= 0, "seed_frames", "must be >= 0");
    require(n_step >= 1, "n_step", "must be >= 1");
    require(gamma >= 0.0 && gamma <= 1.0, "gamma", "must be in [0,1]");
    require(update_every >= 1, "update_every", "must be >= 1");
    require(stddev >= 0.0, "stddev", "must be >= 0");
    require(stddev_clip >= 0.0, "stddev_clip", "must be >= 0");
    require(target_rate > 0.0 && target_rate <= 1.0, "target_rate", "must be in (0,1]");
    require(pretrain_steps > 0, "pretrain_steps", "must be > 0");
    require(finetune_steps > 0, "finetune_steps", "must be > 0");
    require(finetune_choice_steps >= 0, "finetune_choice_steps", "must be >= 0");
    require(finetune_choice_steps <= finetune_steps, "finetune_choice_steps",
            "must not exceed finetune_steps");
    require(combine_steps > 0, "combine_steps", "must be > 0");
    require(combine_hold >= 1, "combine_hold", "must be >= 1");
    require(meta_stddev >= 0.0, "meta_stddev", "must be >= 0");
    require(eval_every >= 1, "eval_every", "must be >= 1");
    require(eval_episodes >= 1, "eval_episodes", "must be >= 1");
    require(log_every >= 1, "log_every", "must be >= 1");
    require(checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
    require(akd_k >= 1, "akd_k", "must be >= 1");
    require(ms_k >= 1, "ms_k", "must be >= 1");
    require(rollout_episodes >= 1, "rollout_episodes", "must be >= 1");
    require(coverage_bins >= 1, "coverage_bins", "must be >= 1");
  }

  void MakeEnvChecked() const {
    bool known = false;
    for (const auto& id : EnvIds()) known = known || id == env_id;
    if (!known) throw ConfigError("env_id", "unknown env '" + env_id + "'");
  }

  RewardConfig reward_config() const {
    RewardConfig r;
    r.alpha = alpha;
    r.smw = smw;
    r.mode = ParseRewardMode(mode);
    r.normalize = normalize;
    r.scale_decay = scale_decay;
    return r;
  }

  DdpgConfig ddpg_config() const {
    return {hidden, learning_rate, stddev, stddev_clip, target_rate};
  }

  KnnConfig knn_config() const { return {knn_k, knn_stabilizer}; }

  DiversityForm diversity() const {
    return diversity_form == "log_q" ? DiversityForm::kLogQ : DiversityForm::kQ;
  }
};

#define COMSD_CONFIG_FIELDS(X)                                                          \
  X(profile) X(env_id) X(task) X(seed) X(skill_dim) X(skill_every) X(alpha) X(mode)    \
  X(normalize) X(scale_decay) X(temperature) X(diversity_form) X(knn_k)                \
  X(knn_stabilizer) X(hidden) X(embed) X(batch_size) X(learning_rate)                  \
  X(finetune_learning_rate) X(replay_capacity) X(seed_frames) X(n_step) X(gamma)       \
  X(update_every) X(stddev) X(stddev_clip) X(target_rate) X(pretrain_steps)           \
  X(finetune_steps) X(finetune_choice_steps) X(combine_steps) X(combine_hold)          \
  X(meta_stddev) X(meta_stddev_clip) X(meta_eval_stddev) X(pretrained_eval_stddev)     \
  X(eval_every) X(eval_episodes) X(log_every) X(checkpoint_every) X(akd_k) X(ms_k)     \
  X(rollout_episodes) X(coverage_bins)

inline Json ToJson(const Config& c) {
  Json j;
#define COMSD_WRITE(name) j[#name] = c.name;
  COMSD_CONFIG_FIELDS(COMSD_WRITE)
#undef COMSD_WRITE
  j["smw"] = {{"w_high", c.smw.w_high},
              {"w_low", c.smw.w_low},
              {"f_high", c.smw.f_high},
              {"f_low", c.smw.f_low}};
  return j;
}

// Starts from the preset named by "profile" (default desk) and applies every
// other key. Unknown keys and wrongly typed values raise ConfigError.
inline Config ConfigFromJson(const Json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  Config c = Config::FromProfile(j.value("profile", std::string("desk")));
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "smw") {
        if (!value.is_object()) throw ConfigError("smw", "must be an object");
        for (const auto& [k, v] : value.items()) {
          if (k == "w_high") c.smw.w_high = v.get<double>();
          else if (k == "w_low") c.smw.w_low = v.get<double>();
          else if (k == "f_high") c.smw.f_high = v.get<double>();
          else if (k == "f_low") c.smw.f_low = v.get<double>();
          else throw ConfigError("smw." + k, "unknown field");
        }
        continue;
      }
      bool matched = false;
#define COMSD_READ(name)                          \
  if (!matched && key == #name) {                 \
    c.name = value.get<decltype(c.name)>();       \
    matched = true;                               \
  }
      COMSD_CONFIG_FIELDS(COMSD_READ)
#undef COMSD_READ
      if (!matched) throw ConfigError(key, "unknown field");
    } catch (const Json::exception& e) {
      throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
  }
  return c;
}

inline Config LoadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return ConfigFromJson(j);
}

}  // namespace comsd
