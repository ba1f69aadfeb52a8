#pragma once

// End-to-end procedures: unsupervised pretraining with the composite
// intrinsic reward, finetuning one fixed skill on a task, and training a
// meta-controller that sequences frozen skills.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "comsd/analysis.hpp"
#include "comsd/checkpoint.hpp"
#include "comsd/config.hpp"
#include "comsd/contrastive.hpp"
#include "comsd/ddpg.hpp"
#include "comsd/entropy.hpp"
#include "comsd/envs.hpp"
#include "comsd/metrics.hpp"
#include "comsd/replay.hpp"
#include "comsd/reward.hpp"
#include "comsd/skillspace.hpp"

namespace comsd {

struct RunOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::vector<double> Concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline void SetCol(Matrix& m, Eigen::Index c, std::span<const double> v, Eigen::Index row = 0) {
  for (std::size_t i = 0; i < v.size(); ++i) m(row + static_cast<Eigen::Index>(i), c) = v[i];
}

inline std::vector<double> UniformAction(int dim, Rng& rng) {
  std::vector<double> a(static_cast<std::size_t>(dim));
  for (double& x : a) x = UniformRange(rng, -1.0, 1.0);
  return a;
}

inline std::vector<double> ActorAction(const DenseNet& actor, std::span<const double> state,
                                       double stddev, double clip, Rng& rng) {
  const Vector mu = Forward(actor, state);
  std::vector<double> a(static_cast<std::size_t>(mu.size()));
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    a[static_cast<std::size_t>(i)] =
        stddev > 0.0 ? std::clamp(mu(i) + ClippedNoise(stddev, clip, rng), -1.0, 1.0) : mu(i);
  return a;
}

// tanh-space meta action -> skill in [0,1]^d
inline SkillVector ToSkill(std::span<const double> meta_action) {
  SkillVector z(meta_action.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = std::clamp(0.5 * (meta_action[i] + 1.0), 0.0, 1.0);
  return z;
}

// evaluation streams are re-seeded on every call so that repeated
// evaluations of the same policy see the same initial states
inline Rng EvalRng(std::uint64_t seed, std::uint64_t salt = 0) {
  return Rng(MixSeed(seed ^ 0x06 ^ (salt << 8)));
}

// A batch for an extrinsic-reward update; the state is concat(obs, skill).
inline DdpgBatch ExtrinsicBatch(const TransitionStore& store,
                                const std::vector<NStepSample>& samples) {
  const Transition& first = store.at(samples.front().start);
  const auto sd = static_cast<Eigen::Index>(first.obs.size() + first.skill.size());
  const auto ad = static_cast<Eigen::Index>(first.action.size());
  const auto n = static_cast<Eigen::Index>(samples.size());
  DdpgBatch b{Matrix(sd, n), Matrix(ad, n), Vector(n), Matrix(sd, n), Vector(n)};
  const auto od = static_cast<Eigen::Index>(first.obs.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    const NStepSample& s = samples[static_cast<std::size_t>(c)];
    const Transition& t = store.at(s.start);
    SetCol(b.state, c, t.obs);
    SetCol(b.state, c, t.skill, od);
    SetCol(b.action, c, t.action);
    b.ret(c) = s.discounted_return;
    SetCol(b.next_state, c, store.AfterWindow(s));
    SetCol(b.next_state, c, t.skill, od);
    b.discount(c) = s.bootstrap_discount;
  }
  return b;
}

inline void WriteConfigSnapshot(const std::filesystem::path& dir, const Config& cfg) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "config.json", std::ios::trunc);
  out << ToJson(cfg).dump(2) << '\n';
}

inline std::filesystem::path CheckpointPath(const std::filesystem::path& dir,
                                            std::optional<std::int64_t> step = std::nullopt) {
  return step ? dir / ("ckpt_" + std::to_string(*step)) : dir / "ckpt";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// evaluation helpers

// Mean undiscounted extrinsic return of actor(concat(obs, skill)).
inline double EvaluatePolicy(const Env& env, const TaskSpec& task, const DenseNet& actor,
                             const SkillVector& skill, int episodes, double stddev,
                             std::uint64_t seed) {
  Rng rng = detail::EvalRng(seed);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EnvState s = env.Reset(rng);
    while (!Env::Done(s)) {
      const auto a = detail::ActorAction(actor, detail::Concat(s.observation, skill), stddev,
                                         0.3, rng);
      s = env.Step(s, a);
      total += ExtrinsicReward(task, s.observation, a);
    }
  }
  return total / episodes;
}

// Return of the frozen skill policy driven by a meta-controller, or by
// uniformly random skills when `meta` is null.
inline double EvaluateCombination(const Env& env, const TaskSpec& task, const DenseNet& skill_actor,
                                  const DenseNet* meta, int hold, int episodes,
                                  double meta_stddev, double skill_stddev, std::uint64_t seed) {
  Rng rng = detail::EvalRng(seed, 1);
  const int d = skill_actor.input_dim() - env.obs_dim();
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EnvState s = env.Reset(rng);
    SkillVector z;
    while (!Env::Done(s)) {
      if (s.step_index % hold == 0) {
        const auto m = meta ? detail::ActorAction(*meta, s.observation, meta_stddev, 0.3, rng)
                            : detail::UniformAction(d, rng);
        z = detail::ToSkill(m);
      }
      const auto a = detail::ActorAction(skill_actor, detail::Concat(s.observation, z),
                                         skill_stddev, 0.3, rng);
      s = env.Step(s, a);
      total += ExtrinsicReward(task, s.observation, a);
    }
  }
  return total / episodes;
}

// ---------------------------------------------------------------------------
// pretraining

struct PretrainStats {
  double r_exploration = 0.0;
  double r_diversity = 0.0;
  double r_intrinsic = 0.0;
  double nce_objective = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

// One learning update: NCE step on the encoders, then intrinsic rewards from
// the updated encoders for every transition in the sampled n-step windows,
// then one critic and one actor step.
inline PretrainStats PretrainUpdate(AgentBundle& agent, EncoderPair& enc, EncoderOptim& enc_opt,
                                    RewardComposer& composer, const TransitionStore& store,
                                    const Config& cfg, SeedStreams& rng) {
  const auto samples = store.SampleNStep(static_cast<std::size_t>(cfg.batch_size), cfg.n_step,
                                         cfg.gamma, rng.sampling);
  const Transition& t0 = store.at(samples.front().start);
  const auto od = static_cast<Eigen::Index>(t0.obs.size());
  const auto d = static_cast<Eigen::Index>(t0.skill.size());
  const auto n = static_cast<Eigen::Index>(samples.size());

  Matrix prev(od, n), cur(od, n), skills(d, n);
  Eigen::Index total = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& s = samples[static_cast<std::size_t>(c)];
    const Transition& t = store.at(s.start);
    detail::SetCol(prev, c, t.obs);
    detail::SetCol(cur, c, t.next_obs);
    detail::SetCol(skills, c, t.skill);
    total += s.n_effective;
  }

  PretrainStats st;
  st.nce_objective = NceStep(enc, enc_opt, prev, cur, skills);

  Matrix wp(od, total), wc(od, total), wz(d, total);
  {
    Eigen::Index k = 0;
    for (const auto& s : samples) {
      for (int m = 0; m < s.n_effective; ++m, ++k) {
        const Transition& t = store.at(s.start + static_cast<std::size_t>(m));
        detail::SetCol(wp, k, t.obs);
        detail::SetCol(wc, k, t.next_obs);
        detail::SetCol(wz, k, t.skill);
      }
    }
  }
  const Matrix h = EncodeTransitions(enc, wp, wc);
  const Vector r_exp = ExplorationReward(h, cfg.knn_config());
  Vector r_div = PairedSimilarity(h, EncodeSkills(enc, wz), enc.temperature);
  if (cfg.diversity() == DiversityForm::kLogQ) r_div = r_div.array().log();
  const Vector r = composer.Compose(r_exp, r_div, wz);
  st.r_exploration = r_exp.mean();
  st.r_diversity = r_div.mean();
  st.r_intrinsic = r.mean();

  DdpgBatch batch{Matrix(od + d, n), Matrix(t0.action.size(), n), Vector(n), Matrix(od + d, n),
                  Vector(n)};
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& s = samples[static_cast<std::size_t>(c)];
    const Transition& t = store.at(s.start);
    batch.state.col(c) << prev.col(c), skills.col(c);
    detail::SetCol(batch.action, c, t.action);
    double g = 0.0, disc = 1.0;
    for (int m = 0; m < s.n_effective; ++m, ++k) {
      g += disc * r(k);
      disc *= cfg.gamma;
    }
    batch.ret(c) = g;
    batch.discount(c) = disc;
    detail::SetCol(batch.next_state, c, store.AfterWindow(s));
    batch.next_state.col(c).tail(d) = skills.col(c);
  }
  st.critic_loss = UpdateCritic(agent, batch, rng.noise);
  st.actor_loss = UpdateActor(agent, batch);
  SoftUpdate(agent);
  return st;
}

struct PretrainResult {
  AgentBundle agent;
  EncoderPair encoders;
  std::int64_t steps = 0;
  long updates = 0;
  int coverage = 0;  // occupied position bins over all collected states
  std::vector<MetricsRow> rows;
};

inline Checkpoint MakePretrainCheckpoint(const Config& cfg, const AgentBundle& agent,
                                         const EncoderPair& enc, std::int64_t step) {
  return {"pretrain",
          step,
          ToJson(cfg),
          {{"actor", agent.actor},
           {"critic", agent.critic},
           {"target_critic", agent.target_critic},
           {"state_trunk", enc.trunk},
           {"predictor", enc.predictor},
           {"skill_encoder", enc.skill}}};
}

inline PretrainResult Pretrain(const Config& cfg, const RunOptions& opts = {}) {
  cfg.Validate();
  const detail::Stopwatch clock;
  SeedStreams rng(cfg.seed);
  const auto env = MakeEnv(cfg.env_id);
  const int od = env->obs_dim();
  const int ad = env->action_dim();
  const int d = cfg.skill_dim;

  PretrainResult res{AgentBundle::Create(od + d, ad, cfg.ddpg_config(), rng.init),
                     EncoderPair::Create(od, d, cfg.hidden, cfg.embed, cfg.temperature, rng.init)};
  EncoderOptim enc_opt(res.encoders, cfg.learning_rate);
  RewardComposer composer(cfg.reward_config());
  TransitionStore store(static_cast<std::size_t>(cfg.replay_capacity), od, ad, d);
  CoverageGrid grid(cfg.coverage_bins, env->position_bound());
  const auto [px, py] = env->position_dims();

  detail::WriteConfigSnapshot(opts.out_dir, cfg);
  MetricsLog log(opts.out_dir);
  MeanAccumulator acc_exp, acc_div, acc_intr, acc_nce, acc_critic, acc_actor;
  std::optional<std::filesystem::path> last_good;

  EnvState s = env->Reset(rng.env);
  grid.Add(s.observation[px], s.observation[py]);
  SkillVector z = SampleSkill(d, rng.skill);
  for (std::int64_t step = 0; step < cfg.pretrain_steps; ++step) {
    if (step % cfg.skill_every == 0) z = SampleSkill(d, rng.skill);
    const auto a = step < cfg.seed_frames
                       ? detail::UniformAction(ad, rng.noise)
                       : Act(res.agent, detail::Concat(s.observation, z), cfg.stddev, rng.noise);
    EnvState next = env->Step(s, a);
    grid.Add(next.observation[px], next.observation[py]);
    store.Push({s.observation, a, z, 0.0, next.observation, Env::Done(next)});
    if (Env::Done(next)) {
      s = env->Reset(rng.env);
      grid.Add(s.observation[px], s.observation[py]);
    } else {
      s = std::move(next);
    }

    if (step >= cfg.seed_frames && step % cfg.update_every == 0 &&
        store.size() > static_cast<std::size_t>(cfg.n_step)) {
      PretrainStats st;
      try {
        st = PretrainUpdate(res.agent, res.encoders, enc_opt, composer, store, cfg, rng);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) +
                           "; last good checkpoint: " +
                           (last_good ? last_good->string() : std::string("none")));
      }
      ++res.updates;
      acc_exp.Add(st.r_exploration);
      acc_div.Add(st.r_diversity);
      acc_intr.Add(st.r_intrinsic);
      acc_nce.Add(st.nce_objective);
      acc_critic.Add(st.critic_loss);
      acc_actor.Add(st.actor_loss);
    }

    const std::int64_t done = step + 1;
    if (done % cfg.log_every == 0 || done == cfg.pretrain_steps) {
      MetricsRow row;
      row.step = done;
      row.phase = "pretrain";
      row.r_exploration = acc_exp.Take();
      row.r_diversity = acc_div.Take();
      row.r_intrinsic = acc_intr.Take();
      row.nce_objective = acc_nce.Take();
      row.critic_loss = acc_critic.Take();
      row.actor_loss = acc_actor.Take();
      row.coverage = grid.count();
      log.Write(row, clock.seconds());
    }
    if (!opts.out_dir.empty() && cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 &&
        done != cfg.pretrain_steps) {
      last_good = detail::CheckpointPath(opts.out_dir, done);
      SaveCheckpoint(*last_good, MakePretrainCheckpoint(cfg, res.agent, res.encoders, done));
    }
  }
  res.steps = cfg.pretrain_steps;
  res.coverage = grid.count();
  res.rows = log.rows();
  if (!opts.out_dir.empty())
    SaveCheckpoint(detail::CheckpointPath(opts.out_dir),
                   MakePretrainCheckpoint(cfg, res.agent, res.encoders, res.steps));
  return res;
}

// ---------------------------------------------------------------------------
// extrinsic-reward training (finetuning and from-scratch)

struct ExtrinsicResult {
  AgentBundle agent;
  SkillVector skill;
  double initial_return = 0.0;  // before any update
  double final_return = 0.0;
  long updates = 0;
  std::vector<MetricsRow> rows;
};

struct ExtrinsicPlan {
  std::string phase;
  std::int64_t total_steps = 0;
  std::int64_t warmup_steps = 0;  // collect without updating
  bool random_warmup = false;     // warm-up with uniform actions instead of the policy
};

inline ExtrinsicResult TrainExtrinsic(const Config& cfg, const TaskSpec& task, AgentBundle agent,
                                      SkillVector skill, const ExtrinsicPlan& plan,
                                      SeedStreams& rng, const RunOptions& opts) {
  const detail::Stopwatch clock;
  const auto env = MakeEnv(task.env_id);
  if (agent.state_dim() != env->obs_dim() + static_cast<int>(skill.size()))
    throw CheckpointError("policy input dim " + std::to_string(agent.state_dim()) +
                          " does not match env '" + task.env_id + "' plus skill");
  const int ad = env->action_dim();
  TransitionStore store(static_cast<std::size_t>(cfg.replay_capacity), env->obs_dim(), ad,
                        static_cast<int>(skill.size()));
  MetricsLog log(opts.out_dir);
  MeanAccumulator acc_critic, acc_actor;

  ExtrinsicResult res{std::move(agent), skill};
  res.initial_return = EvaluatePolicy(*env, task, res.agent.actor, skill, cfg.eval_episodes, 0.0,
                                      cfg.seed);
  EnvState s = env->Reset(rng.env);
  for (std::int64_t step = 0; step < plan.total_steps; ++step) {
    const bool warm = step < plan.warmup_steps;
    const auto a = warm && plan.random_warmup
                       ? detail::UniformAction(ad, rng.noise)
                       : Act(res.agent, detail::Concat(s.observation, skill), res.agent.cfg.stddev,
                             rng.noise);
    EnvState next = env->Step(s, a);
    const double r = ExtrinsicReward(task, next.observation, a);
    store.Push({s.observation, a, skill, r, next.observation, Env::Done(next)});
    s = Env::Done(next) ? env->Reset(rng.env) : std::move(next);

    if (!warm && step % cfg.update_every == 0 &&
        store.size() > static_cast<std::size_t>(cfg.n_step)) {
      const auto samples = store.SampleNStep(static_cast<std::size_t>(cfg.batch_size), cfg.n_step,
                                             cfg.gamma, rng.sampling);
      const DdpgBatch batch = detail::ExtrinsicBatch(store, samples);
      acc_critic.Add(UpdateCritic(res.agent, batch, rng.noise));
      acc_actor.Add(UpdateActor(res.agent, batch));
      SoftUpdate(res.agent);
      ++res.updates;
    }

    const std::int64_t done = step + 1;
    if (done % cfg.eval_every == 0 || done == plan.total_steps) {
      MetricsRow row;
      row.step = done;
      row.phase = plan.phase;
      row.critic_loss = acc_critic.Take();
      row.actor_loss = acc_actor.Take();
      row.episode_return = EvaluatePolicy(*env, task, res.agent.actor, skill, cfg.eval_episodes,
                                          0.0, cfg.seed);
      log.Write(row, clock.seconds());
    }
  }
  res.final_return = log.rows().empty() ? res.initial_return : log.rows().back().episode_return;
  res.rows = log.rows();
  return res;
}

inline Checkpoint MakePolicyCheckpoint(const std::string& kind, const Config& cfg,
                                       const AgentBundle& agent, std::int64_t step) {
  return {kind, step, ToJson(cfg),
          {{"actor", agent.actor}, {"critic", agent.critic}, {"target_critic", agent.target_critic}}};
}

namespace detail {

inline void CheckCheckpointEnv(const Checkpoint& ck, const TaskSpec& task) {
  const std::string ck_env = ck.config.value("env_id", std::string());
  if (!ck_env.empty() && ck_env != task.env_id)
    throw CheckpointError("checkpoint was trained on env '" + ck_env + "', task '" + task.task_id +
                          "' belongs to '" + task.env_id + "'");
}

}  // namespace detail

// Adapts pi(a|s, z_fixed) to a task: z_fixed = (0, 0.5, ..., 0.5); the first
// finetune_choice_steps only collect; the critic starts fresh.
inline ExtrinsicResult Finetune(const Config& cfg, const Checkpoint& ck, const TaskSpec& task,
                                const RunOptions& opts = {}) {
  cfg.Validate();
  detail::CheckCheckpointEnv(ck, task);
  SeedStreams rng(cfg.seed);
  const auto env = MakeEnv(task.env_id);
  const DenseNet& actor = ck.net("actor");
  const int d = actor.input_dim() - env->obs_dim();
  if (d < 1 || actor.output_dim() != env->action_dim())
    throw CheckpointError("checkpoint actor does not fit env '" + task.env_id + "'");

  DdpgConfig dc = cfg.ddpg_config();
  dc.learning_rate = cfg.finetune_learning_rate;
  AgentBundle agent = AgentBundle::Create(actor.input_dim(), actor.output_dim(), dc, rng.init);
  agent.actor = actor;
  agent.actor_opt = AdamState(agent.actor.params(), dc.learning_rate);

  detail::WriteConfigSnapshot(opts.out_dir, cfg);
  ExtrinsicPlan plan{"finetune", cfg.finetune_steps, cfg.finetune_choice_steps, false};
  ExtrinsicResult res = TrainExtrinsic(cfg, task, std::move(agent), FinetuneSkill(d), plan, rng, opts);
  if (!opts.out_dir.empty())
    SaveCheckpoint(detail::CheckpointPath(opts.out_dir),
                   MakePolicyCheckpoint("finetune", cfg, res.agent, cfg.finetune_steps));
  return res;
}

// Plain DDPG on the task from a random initialization (no skill input).
inline ExtrinsicResult TrainFromScratch(const Config& cfg, const TaskSpec& task,
                                        std::int64_t steps, const RunOptions& opts = {}) {
  cfg.Validate();
  SeedStreams rng(cfg.seed);
  const auto env = MakeEnv(task.env_id);
  AgentBundle agent =
      AgentBundle::Create(env->obs_dim(), env->action_dim(), cfg.ddpg_config(), rng.init);
  ExtrinsicPlan plan{"scratch", steps, cfg.seed_frames, true};
  return TrainExtrinsic(cfg, task, std::move(agent), {}, plan, rng, opts);
}

// ---------------------------------------------------------------------------
// skill combination

struct CombineResult {
  AgentBundle meta;
  double initial_return = 0.0;
  double final_return = 0.0;
  double random_skill_return = 0.0;
  std::uint64_t checksum_before = 0;
  std::uint64_t checksum_after = 0;
  long updates = 0;
  std::vector<MetricsRow> rows;
};

inline CombineResult Combine(const Config& cfg, const Checkpoint& ck, const TaskSpec& task,
                             const RunOptions& opts = {}) {
  cfg.Validate();
  detail::CheckCheckpointEnv(ck, task);
  const detail::Stopwatch clock;
  SeedStreams rng(cfg.seed);
  const auto env = MakeEnv(task.env_id);
  const DenseNet skill_actor = ck.net("actor");
  const int od = env->obs_dim();
  const int d = skill_actor.input_dim() - od;
  if (d < 1 || skill_actor.output_dim() != env->action_dim())
    throw CheckpointError("checkpoint actor does not fit env '" + task.env_id + "'");

  DdpgConfig mc = cfg.ddpg_config();
  mc.stddev = cfg.meta_stddev;
  mc.stddev_clip = cfg.meta_stddev_clip;
  CombineResult res{AgentBundle::Create(od, d, mc, rng.init)};
  res.checksum_before = ParamChecksum(skill_actor);

  auto evaluate = [&](const DenseNet* meta) {
    return EvaluateCombination(*env, task, skill_actor, meta, cfg.combine_hold, cfg.eval_episodes,
                               cfg.meta_eval_stddev, cfg.pretrained_eval_stddev, cfg.seed);
  };
  res.random_skill_return = evaluate(nullptr);
  res.initial_return = evaluate(&res.meta.actor);

  detail::WriteConfigSnapshot(opts.out_dir, cfg);
  MetricsLog log(opts.out_dir);
  MeanAccumulator acc_critic, acc_actor;
  TransitionStore store(static_cast<std::size_t>(cfg.replay_capacity), od, d, 0);
  EnvState s = env->Reset(rng.env);
  std::vector<double> m;
  for (std::int64_t step = 0; step < cfg.combine_steps; ++step) {
    if (s.step_index % cfg.combine_hold == 0) {
      m = step < cfg.seed_frames ? detail::UniformAction(d, rng.noise)
                                 : Act(res.meta, s.observation, mc.stddev, rng.noise);
    }
    const SkillVector z = detail::ToSkill(m);
    const auto a = detail::ActorAction(skill_actor, detail::Concat(s.observation, z),
                                       cfg.pretrained_eval_stddev, 0.3, rng.noise);
    EnvState next = env->Step(s, a);
    const double r = ExtrinsicReward(task, next.observation, a);
    store.Push({s.observation, m, {}, r, next.observation, Env::Done(next)});
    s = Env::Done(next) ? env->Reset(rng.env) : std::move(next);

    if (step >= cfg.seed_frames && step % cfg.update_every == 0 &&
        store.size() > static_cast<std::size_t>(cfg.n_step)) {
      const auto samples = store.SampleNStep(static_cast<std::size_t>(cfg.batch_size), cfg.n_step,
                                             cfg.gamma, rng.sampling);
      const DdpgBatch batch = detail::ExtrinsicBatch(store, samples);
      acc_critic.Add(UpdateCritic(res.meta, batch, rng.noise));
      acc_actor.Add(UpdateActor(res.meta, batch));
      SoftUpdate(res.meta);
      ++res.updates;
    }

    const std::int64_t done = step + 1;
    if (done % cfg.eval_every == 0 || done == cfg.combine_steps) {
      MetricsRow row;
      row.step = done;
      row.phase = "combine";
      row.critic_loss = acc_critic.Take();
      row.actor_loss = acc_actor.Take();
      row.episode_return = evaluate(&res.meta.actor);
      log.Write(row, clock.seconds());
    }
  }
  res.final_return = log.rows().back().episode_return;
  res.rows = log.rows();
  res.checksum_after = ParamChecksum(skill_actor);
  if (res.checksum_after != res.checksum_before)
    throw std::logic_error("combine: frozen skill policy was modified");
  if (!opts.out_dir.empty())
    SaveCheckpoint(detail::CheckpointPath(opts.out_dir),
                   MakePolicyCheckpoint("combine", cfg, res.meta, cfg.combine_steps));
  return res;
}

// ---------------------------------------------------------------------------
// analysis rollouts

// Deterministic rollouts (stddev 0) of each skill for `episodes` full
// episodes; records the post-step observation of every step.
inline std::vector<SkillRollout> RolloutSkills(const Env& env, const DenseNet& actor,
                                               const std::vector<SkillVector>& skills,
                                               int episodes, std::uint64_t seed) {
  std::vector<SkillRollout> out;
  for (std::size_t i = 0; i < skills.size(); ++i) {
    Rng rng = detail::EvalRng(seed, 2 + i);
    SkillRollout r{skills[i], Matrix(env.obs_dim(), episodes * env.horizon())};
    Eigen::Index col = 0;
    for (int e = 0; e < episodes; ++e) {
      EnvState s = env.Reset(rng);
      while (!Env::Done(s)) {
        const auto a = detail::ActorAction(actor, detail::Concat(s.observation, skills[i]), 0.0,
                                           0.3, rng);
        s = env.Step(s, a);
        detail::SetCol(r.states, col++, s.observation);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct AnalysisReport {
  std::vector<double> flags;
  std::vector<double> akd;
  std::vector<int> coverage;  // per skill
  AkdSummary akd_summary;
  MsMetrics ms;
  int total_coverage = 0;
};

inline AnalysisReport Analyze(const std::vector<SkillRollout>& rollouts, const Env& env,
                              const Config& cfg) {
  AnalysisReport rep;
  const auto [px, py] = env.position_dims();
  Eigen::Index total_cols = 0;
  for (const auto& r : rollouts) {
    rep.flags.push_back(Flag(r.skill));
    rep.akd.push_back(Akd(r.states, cfg.akd_k));
    rep.coverage.push_back(BinCoverage(r.states, {px, py}, cfg.coverage_bins, env.position_bound()));
    total_cols += r.states.cols();
  }
  Matrix all(env.obs_dim(), total_cols);
  Eigen::Index c = 0;
  for (const auto& r : rollouts) {
    all.middleCols(c, r.states.cols()) = r.states;
    c += r.states.cols();
  }
  rep.total_coverage = BinCoverage(all, {px, py}, cfg.coverage_bins, env.position_bound());
  rep.akd_summary = SummarizeAkd(rep.akd);
  rep.ms = ComputeMsMetrics(rollouts, cfg.ms_k);
  return rep;
}

// ---------------------------------------------------------------------------
// baselines

// Cumulative position-bin coverage of a uniform random policy.
inline int RandomPolicyCoverage(const std::string& env_id, std::int64_t steps, int bins,
                                std::uint64_t seed) {
  SeedStreams rng(seed);
  const auto env = MakeEnv(env_id);
  const auto [px, py] = env->position_dims();
  CoverageGrid grid(bins, env->position_bound());
  EnvState s = env->Reset(rng.env);
  grid.Add(s.observation[px], s.observation[py]);
  for (std::int64_t step = 0; step < steps; ++step) {
    s = env->Step(s, detail::UniformAction(env->action_dim(), rng.noise));
    grid.Add(s.observation[px], s.observation[py]);
    if (Env::Done(s)) {
      s = env->Reset(rng.env);
      grid.Add(s.observation[px], s.observation[py]);
    }
  }
  return grid.count();
}

// PD controller toward a point-mass goal; reference return for reach tasks.
inline double ProportionalControllerReturn(const TaskSpec& task, int episodes, std::uint64_t seed,
                                           double kp = 4.0, double kd = 1.0) {
  if (task.env_id != "pointmass" || (task.task_id != "reach_ne" && task.task_id != "reach_sw"))
    throw std::invalid_argument("proportional controller only defined for pointmass reach tasks");
  const double g = task.task_id == "reach_ne" ? 0.8 : -0.8;
  const PointMassRooms env;
  Rng rng = detail::EvalRng(seed);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EnvState s = env.Reset(rng);
    while (!Env::Done(s)) {
      const auto& o = s.observation;
      const std::vector<double> a{std::clamp(kp * (g - o[0]) - kd * o[2], -1.0, 1.0),
                                  std::clamp(kp * (g - o[1]) - kd * o[3], -1.0, 1.0)};
      s = env.Step(s, a);
      total += ExtrinsicReward(task, s.observation, a);
    }
  }
  return total / episodes;
}

}  // namespace comsd
