// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance --only 4,9 run a subset
//
// The experiment criteria use the acceptance profile below (narrower
// networks and batch than the desk preset) so the whole suite fits a single
// CPU core in under an hour.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "comsd/cli.hpp"
#include "comsd/comsd.hpp"
#include "oracles.hpp"

namespace comsd {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

Config AcceptanceProfile() {
  Config c = Config::Desk();
  c.hidden = 64;
  c.embed = 16;
  c.batch_size = 64;
  c.log_every = 10000;
  c.replay_capacity = 200000;
  return c;
}

std::string Fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string Join(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + Fmt(v[i]);
  return s + "]";
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

void Progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

// ---------------------------------------------------------------------------
// 1. SMW exactness

Outcome SmwExactness() {
  struct Case {
    SmwParams p;
    double flag, beta;
  };
  const std::vector<Case> cases{{SmwParams::Walker(), 0.5, 1.0},   {SmwParams::Walker(), 0.0, 0.0},
                                {SmwParams::Walker(), 1.0, 2.0},   {SmwParams::Walker(), 0.3, 0.6},
                                {SmwParams::Hopper(), 0.5, 1.0},   {SmwParams::Hopper(), 0.2, 0.0},
                                {SmwParams::Hopper(), 0.9, 2.0},   {SmwParams::Hopper(), 0.4, 0.4}};
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, std::abs(SmwBeta(c.flag, c.p) - c.beta));

  Rng rng(2024);
  int violations = 0;
  for (int t = 0; t < 10000; ++t) {
    SmwParams p;
    p.w_low = UniformRange(rng, -2.0, 2.0);
    p.w_high = p.w_low + UniformRange(rng, 0.0, 4.0);
    p.f_low = UniformRange(rng, 0.0, 0.95);
    p.f_high = p.f_low + UniformRange(rng, 1e-3, 1.0 - p.f_low);
    const double a = Uniform01(rng), b = Uniform01(rng);
    const double ba = SmwBeta(std::min(a, b), p), bb = SmwBeta(std::max(a, b), p);
    if (ba > bb + 1e-12 || ba < p.w_low || bb > p.w_high) ++violations;
  }
  return {worst <= 1e-12 && violations == 0,
          "max |beta - hand| = " + Fmt(worst) + ", property violations " +
              std::to_string(violations) + "/10000"};
}

// ---------------------------------------------------------------------------
// 2. entropy oracle

Outcome EntropyOracle() {
  Rng rng(77);
  double worst = 0.0;
  for (int b = 0; b < 200; ++b) {
    const int k = 1 + static_cast<int>(rng() % 16);
    const auto n = static_cast<Eigen::Index>(k + 1 + rng() % static_cast<unsigned>(256 - k));
    const auto e = static_cast<Eigen::Index>(1 + rng() % 32);
    Matrix h = oracle::RandomMatrix(e, n, rng, -3.0, 3.0);
    if (b % 10 == 0) h.col(n - 1) = h.col(0);
    const Vector r = ExplorationReward(h, {k, 1.0});
    const auto ref = oracle::ParticleReward(h, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double want = ref[static_cast<std::size_t>(i)];
      worst = std::max(worst, std::abs(r(i) - want) / std::max(std::abs(want), 1e-300));
    }
  }
  return {worst <= 1e-9, "max relative error " + Fmt(worst) + " over 200 batches"};
}

// ---------------------------------------------------------------------------
// 3. gradient checks

Outcome GradientChecks() {
  Rng rng(5);
  double nce = 0.0, critic = 0.0, actor = 0.0;
  {
    auto p = EncoderPair::Create(3, 2, 5, 4, 0.5, rng);
    const Matrix prev = oracle::RandomMatrix(3, 6, rng), cur = oracle::RandomMatrix(3, 6, rng);
    const Matrix z = oracle::RandomMatrix(2, 6, rng, 0.0, 1.0);
    const NceResult r = NceLossAndGrad(p, prev, cur, z);
    auto loss = [&] { return -NceLossAndGrad(p, prev, cur, z).objective; };
    nce = std::max({oracle::CheckGradient(p.trunk.params(), r.trunk_grad, loss).max_rel_error,
                    oracle::CheckGradient(p.predictor.params(), r.predictor_grad, loss).max_rel_error,
                    oracle::CheckGradient(p.skill.params(), r.skill_grad, loss).max_rel_error});
  }
  {
    DdpgConfig cfg;
    cfg.hidden = 6;
    AgentBundle b = AgentBundle::Create(4, 2, cfg, rng);
    const DdpgBatch batch{oracle::RandomMatrix(4, 5, rng), oracle::RandomMatrix(2, 5, rng),
                          Vector(), Matrix(), Vector()};
    const Vector y = oracle::RandomMatrix(5, 1, rng).col(0);
    const auto rc = CriticLossAndGrad(b.critic, batch, y);
    critic = oracle::CheckGradient(b.critic.params(), rc.grad, [&] {
               return CriticLossAndGrad(b.critic, batch, y).loss;
             }).max_rel_error;
    const auto ra = ActorLossAndGrad(b.actor, b.critic, batch.state);
    actor = oracle::CheckGradient(b.actor.params(), ra.grad, [&] {
              return ActorLossAndGrad(b.actor, b.critic, batch.state).loss;
            }).max_rel_error;
  }
  return {nce < 1e-4 && critic < 1e-4 && actor < 1e-4,
          "max rel error nce " + Fmt(nce) + ", critic " + Fmt(critic) + ", actor " + Fmt(actor)};
}

// ---------------------------------------------------------------------------
// 4. analytic unit values

Outcome AnalyticValues() {
  std::vector<std::pair<std::string, double>> errs;
  Vector u(3);
  u << 0.2, -0.7, 1.1;
  errs.emplace_back("q(u,u)", std::abs(SimilarityQ(u, u, 0.5) - std::exp(2.0)));

  Matrix same(4, 4);
  for (Eigen::Index i = 0; i < 4; ++i) same.col(i).setConstant(0.3 * static_cast<double>(i));
  errs.emplace_back("nce zero case", NceTerms(same).cwiseAbs().maxCoeff());

  ParamSet p{Matrix::Constant(1, 1, 0.5)};
  AdamState st(p, 1e-4);
  AdamStep(p, {Matrix::Ones(1, 1)}, st);
  errs.emplace_back("adam first step", std::abs(p[0](0, 0) - (0.5 - 1e-4 / (1.0 + 1e-8))));

  Rng rng(1);
  DdpgConfig cfg;
  cfg.hidden = 3;
  AgentBundle b = AgentBundle::Create(1, 1, cfg, rng);
  for (auto& t : b.target_critic.params()) t.setZero();
  for (auto& t : b.critic.params()) t.setOnes();
  for (int i = 0; i < 100; ++i) SoftUpdate(b);
  errs.emplace_back("soft update", std::abs(b.target_critic.params()[0](0, 0) -
                                            (1.0 - std::pow(0.99, 100))));

  TransitionStore store(8, 1, 1, 1);
  for (int i = 0; i < 4; ++i) store.Push({{0.0}, {0.0}, {0.0}, 1.0, {0.0}, false});
  errs.emplace_back("n-step return", std::abs(store.Assemble(0, 3, 0.99).discounted_return - 2.9701));

  bool pass = true;
  std::string detail;
  for (const auto& [name, e] : errs) {
    pass = pass && e <= 1e-9;
    detail += (detail.empty() ? "" : ", ") + name + " " + Fmt(e, 2);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 5. learner sanity: from-scratch DDPG on reach_ne

Outcome LearnerSanity() {
  const auto task = MakeTask("pointmass", "reach_ne");
  const Config base = AcceptanceProfile();
  const double reference = ProportionalControllerReturn(task, base.eval_episodes, 0);
  std::vector<double> best;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Config c = base;
    c.seed = seed;
    // lr 1e-4 with batch 64 parks the actor in the saturated corner
    c.batch_size = 128;
    c.learning_rate = 1e-3;
    const auto r = TrainFromScratch(c, task, 50000);
    double m = r.initial_return;
    for (const auto& row : r.rows) m = std::max(m, row.episode_return);
    best.push_back(m);
    ok += m >= 0.8 * reference;
    Progress("scratch seed " + std::to_string(seed) + " best return " + Fmt(m));
  }
  return {ok >= 2, "controller return " + Fmt(reference) + ", best returns " + Join(best) +
                       ", seeds >= 0.8x: " + std::to_string(ok) + "/3"};
}

// ---------------------------------------------------------------------------
// shared pretraining runs

struct PretrainOutcome {
  PretrainResult result;
  Config cfg;
};

PretrainOutcome PretrainRun(const std::string& env_id, const std::string& mode,
                            std::uint64_t seed) {
  Config c = AcceptanceProfile();
  c.env_id = env_id;
  c.mode = mode;
  c.seed = seed;
  c.pretrain_steps = 100000;
  const auto t0 = std::chrono::steady_clock::now();
  auto r = Pretrain(c);
  Progress("pretrain " + env_id + " " + mode + " seed " + std::to_string(seed) + " (" +
           Fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3) +
           " s)");
  return {std::move(r), c};
}

// Deterministic rollouts of `skills`, one episode each.
std::vector<SkillRollout> Rollouts(const PretrainOutcome& p, const std::vector<SkillVector>& skills) {
  const auto env = MakeEnv(p.cfg.env_id);
  return RolloutSkills(*env, p.result.agent.actor, skills, 1, p.cfg.seed);
}

// ---------------------------------------------------------------------------
// 6. exploration effect

Outcome ExplorationEffect() {
  constexpr int kSkills = 16;
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = PretrainRun("pointmass", "exploration_only", seed);
    Rng draw(MixSeed(seed ^ 0xacce));
    std::vector<SkillVector> skills;
    for (int i = 0; i < kSkills; ++i) skills.push_back(SampleSkill(p.cfg.skill_dim, draw));
    const auto rollouts = Rollouts(p, skills);
    const auto env = MakeEnv("pointmass");
    const auto rep = Analyze(rollouts, *env, p.cfg);
    const int random = RandomPolicyCoverage("pointmass", kSkills * env->horizon(),
                                            p.cfg.coverage_bins, seed);
    ratios.push_back(static_cast<double>(rep.total_coverage) / random);
    Progress("coverage " + std::to_string(rep.total_coverage) + " vs random " +
             std::to_string(random));
  }
  const double med = Median(ratios);
  return {med >= 1.5, "coverage ratio vs uniform-random per seed " + Join(ratios) + ", median " +
                          Fmt(med)};
}

// ---------------------------------------------------------------------------
// 7 and 8. diversity and SMW region effects on PlanarArm

struct ArmSeed {
  double ms_comsd = 0.0, ms_expl = 0.0;
  double akd_low = 0.0, akd_high = 0.0;
  double range_comsd = 0.0, range_no_smw = 0.0;
};

std::vector<ArmSeed>& ArmRuns() {
  static std::vector<ArmSeed> runs;
  if (!runs.empty()) return runs;
  constexpr int kSkills = 16;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ArmSeed s;
    const auto env = MakeEnv("planararm");
    auto analyze = [&](const std::string& mode) {
      const auto p = PretrainRun("planararm", mode, seed);
      const auto rollouts = Rollouts(p, GridSweep(kSkills, p.cfg.skill_dim));
      return std::make_pair(Analyze(rollouts, *env, p.cfg), p.cfg);
    };
    const auto [comsd, cfg] = analyze("comsd");
    s.ms_comsd = comsd.ms.coverage;
    s.range_comsd = comsd.akd_summary.range;
    double lo = 0.0, hi = 0.0;
    int nlo = 0, nhi = 0;
    for (std::size_t i = 0; i < comsd.akd.size(); ++i) {
      if (comsd.flags[i] <= cfg.smw.f_low) lo += comsd.akd[i], ++nlo;
      if (comsd.flags[i] >= cfg.smw.f_high) hi += comsd.akd[i], ++nhi;
    }
    s.akd_low = lo / nlo;
    s.akd_high = hi / nhi;
    s.ms_expl = analyze("exploration_only").first.ms.coverage;
    s.range_no_smw = analyze("no_smw").first.akd_summary.range;
    runs.push_back(s);
  }
  return runs;
}

Outcome DiversityEffect() {
  int ok = 0;
  std::string detail = "ms_coverage comsd vs exploration_only:";
  for (const auto& s : ArmRuns()) {
    ok += s.ms_comsd > s.ms_expl;
    detail += " " + Fmt(s.ms_comsd) + ">" + Fmt(s.ms_expl) + (s.ms_comsd > s.ms_expl ? "(y)" : "(n)");
  }
  return {ok >= 2, detail + ", pairs won " + std::to_string(ok) + "/3"};
}

Outcome SmwRegionEffect() {
  int region = 0, range = 0;
  std::string a = "akd low vs high flag:", b = "akd range comsd vs 2x no_smw:";
  for (const auto& s : ArmRuns()) {
    region += s.akd_low > s.akd_high;
    range += s.range_comsd >= 2.0 * s.range_no_smw;
    a += " " + Fmt(s.akd_low) + "/" + Fmt(s.akd_high);
    b += " " + Fmt(s.range_comsd) + "/" + Fmt(2.0 * s.range_no_smw);
  }
  return {region >= 2 && range >= 2, a + " (" + std::to_string(region) + "/3); " + b + " (" +
                                         std::to_string(range) + "/3)"};
}

// ---------------------------------------------------------------------------
// 9. combination adaptation

Outcome CombinationAdaptation() {
  const auto task = MakeTask("pointmass", "reach_ne");
  std::vector<double> ratios;
  bool frozen = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = PretrainRun("pointmass", "comsd", seed);
    const Checkpoint ck = MakePretrainCheckpoint(p.cfg, p.result.agent, p.result.encoders,
                                                 p.result.steps);
    Config c = p.cfg;
    c.combine_steps = 50000;
    const auto r = Combine(c, ck, task);
    frozen = frozen && r.checksum_before == r.checksum_after &&
             r.checksum_after == ParamChecksum(p.result.agent.actor);
    ratios.push_back(r.final_return / std::max(r.random_skill_return, 1e-9));
    Progress("combine seed " + std::to_string(seed) + " final " + Fmt(r.final_return) +
             " random-skill " + Fmt(r.random_skill_return));
  }
  const double med = Median(ratios);
  return {med >= 1.2 && frozen, "return ratio vs random-skill selection " + Join(ratios) +
                                    ", median " + Fmt(med) + ", frozen checksum " +
                                    (frozen ? "unchanged" : "CHANGED")};
}

// ---------------------------------------------------------------------------
// 10. reproducibility through the CLI

Outcome Reproducibility() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "comsd-acceptance-repro";
  fs::remove_all(root);
  fs::create_directories(root);
  Json cfg = ToJson(AcceptanceProfile());
  cfg["pretrain_steps"] = 6000;
  cfg["finetune_steps"] = 6000;
  cfg["combine_steps"] = 6000;
  cfg["log_every"] = 1000;
  cfg["eval_every"] = 2000;
  cfg["eval_episodes"] = 2;
  std::ofstream(root / "cfg.json") << cfg.dump(2);
  const std::string cfg_path = (root / "cfg.json").string();

  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "comsd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) throw std::runtime_error("cli failed: " + err.str());
  };
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  int identical = 0, total = 0;
  for (const char* rep : {"a", "b"}) {
    const auto dir = root / rep;
    run({"pretrain", "--config", cfg_path, "--seed", "11", "--out", (dir / "pre").string()});
    const auto ck = (dir / "pre" / "ckpt").string();
    run({"finetune", "--config", cfg_path, "--seed", "11", "--checkpoint", ck, "--task",
         "reach_ne", "--out", (dir / "ft").string()});
    run({"combine", "--config", cfg_path, "--seed", "11", "--checkpoint", ck, "--task",
         "reach_sw", "--out", (dir / "cb").string()});
    run({"pretrain", "--config", cfg_path, "--seed", "11", "--mode", "no_smw", "--steps", "5000",
         "--out", (dir / "arm").string()});
  }
  for (const char* phase : {"pre", "ft", "cb", "arm"}) {
    ++total;
    const std::string a = read(root / "a" / phase / "metrics.csv");
    identical += !a.empty() && a == read(root / "b" / phase / "metrics.csv");
  }
  return {identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                  " repeated CLI runs produced byte-identical metrics.csv"};
}

}  // namespace
}  // namespace comsd

int main(int argc, char** argv) {
  using namespace comsd;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    }
  }

  const std::vector<Criterion> criteria{
      {1, "SMW exactness", 1.0, SmwExactness},
      {2, "entropy oracle", 10.0, EntropyOracle},
      {3, "gradient checks", 30.0, GradientChecks},
      {4, "analytic unit values", 1.0, AnalyticValues},
      {5, "learner sanity", 600.0, LearnerSanity},
      {6, "exploration effect", 1200.0, ExplorationEffect},
      {7, "diversity effect", 2400.0, DiversityEffect},
      {8, "SMW region effect", 2400.0, SmwRegionEffect},
      {9, "combination adaptation", 900.0, CombinationAdaptation},
      {10, "reproducibility", 600.0, Reproducibility},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.name
              << " | " << o.detail << " | " << Fmt(secs, 3) << " s (budget " << c.budget_seconds
              << " s)" << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed"
                       : std::string("acceptance: all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
