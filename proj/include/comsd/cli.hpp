#pragma once

// Command-line front end. RunCli is kept separate from main() so tests can
// drive it in-process.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
// arguments, 3 missing or incompatible checkpoint. Failures print exactly one
// line to stderr:
//   error code=<n> kind=<config|checkpoint|numeric|runtime> [field=<f>] msg="<text>"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "comsd/comsd.hpp"

namespace comsd {

namespace cli_detail {

struct Args {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::string> mode;
  std::string out;
  std::optional<std::string> task;
  std::string checkpoint;
  std::string rollouts;
  int skills = 11;
  std::string env_id;
};

inline Config ResolveConfig(const Args& a, const std::string& phase) {
  Config c = a.config_path.empty() ? Config::Desk() : LoadConfigFile(a.config_path);
  if (a.seed) c.seed = *a.seed;
  if (a.mode) c.mode = *a.mode;
  if (a.task) c.task = *a.task;
  if (a.steps) {
    if (*a.steps <= 0) throw ConfigError("--steps", "must be > 0");
    if (phase == "pretrain") c.pretrain_steps = *a.steps;
    if (phase == "finetune") {
      c.finetune_steps = *a.steps;
      c.finetune_choice_steps = std::min(c.finetune_choice_steps, *a.steps);
    }
    if (phase == "combine") c.combine_steps = *a.steps;
  }
  c.Validate();
  return c;
}

inline std::filesystem::path RunDir(const Args& a, const Config& c, const std::string& phase) {
  if (!a.out.empty()) return a.out;
  const char* root = std::getenv("COMSD_RUN_DIR");
  const std::filesystem::path base = root && *root ? root : "runs";
  return base / (phase + "-" + c.env_id + "-seed" + std::to_string(c.seed));
}

// Env id from the checkpoint's config snapshot wins over the run config.
inline Config AdoptCheckpointEnv(Config c, const Checkpoint& ck) {
  const std::string env = ck.config.value("env_id", std::string());
  if (!env.empty()) c.env_id = env;
  return c;
}

inline void WriteRolloutsCsv(const std::filesystem::path& path,
                             const std::vector<SkillRollout>& rollouts) {
  std::ofstream out(path, std::ios::trunc);
  out << "rollout,flag";
  const auto dim = rollouts.empty() ? 0 : rollouts.front().states.rows();
  for (Eigen::Index i = 0; i < dim; ++i) out << ",s" << i;
  out << '\n';
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    for (Eigen::Index c = 0; c < rollouts[r].states.cols(); ++c) {
      out << r << ',' << FormatCell(Flag(rollouts[r].skill));
      for (Eigen::Index i = 0; i < dim; ++i) out << ',' << FormatCell(rollouts[r].states(i, c));
      out << '\n';
    }
  }
}

// Inverse of WriteRolloutsCsv. Only the flag of each skill is recorded, so
// the returned skills are one-dimensional.
inline std::vector<SkillRollout> ReadRolloutsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--rollouts", "cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::map<long, std::pair<double, std::vector<std::vector<double>>>> groups;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() < 3) throw ConfigError("--rollouts", "row has no state columns");
    auto& g = groups[static_cast<long>(vals[0])];
    g.first = vals[1];
    g.second.emplace_back(vals.begin() + 2, vals.end());
  }
  std::vector<SkillRollout> out;
  for (auto& [id, g] : groups) {
    SkillRollout r{{g.first}, Matrix(static_cast<Eigen::Index>(g.second.front().size()),
                                     static_cast<Eigen::Index>(g.second.size()))};
    for (std::size_t c = 0; c < g.second.size(); ++c) {
      if (g.second[c].size() != static_cast<std::size_t>(r.states.rows()))
        throw ConfigError("--rollouts", "rows differ in state dimension");
      for (std::size_t i = 0; i < g.second[c].size(); ++i)
        r.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = g.second[c][i];
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void WriteAnalysisCsv(const std::filesystem::path& path, const AnalysisReport& rep) {
  std::ofstream out(path, std::ios::trunc);
  out << "row,flag,akd,coverage,akd_variance,akd_range,akd_max,ms_coverage,ms_coverage_aknn,"
         "ms_range\n";
  for (std::size_t i = 0; i < rep.akd.size(); ++i)
    out << i << ',' << FormatCell(rep.flags[i]) << ',' << FormatCell(rep.akd[i]) << ','
        << rep.coverage[i] << ",,,,,,\n";
  out << "summary,,," << rep.total_coverage << ',' << FormatCell(rep.akd_summary.variance) << ','
      << FormatCell(rep.akd_summary.range) << ',' << FormatCell(rep.akd_summary.max) << ','
      << FormatCell(rep.ms.coverage) << ',' << FormatCell(rep.ms.coverage_aknn) << ','
      << FormatCell(rep.ms.range) << '\n';
}

inline int Fail(std::ostream& err, int code, const std::string& kind, const std::string& msg,
                const std::string& field = "") {
  std::string clean = msg;
  for (char& ch : clean)
    if (ch == '\n' || ch == '"') ch = '\'';
  err << "error code=" << code << " kind=" << kind;
  if (!field.empty()) err << " field=" << field;
  err << " msg=\"" << clean << "\"" << std::endl;
  return code;
}

}  // namespace cli_detail

inline int RunCli(int argc, const char* const* argv, std::ostream& out = std::cout,
                  std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"comsd: unsupervised skill discovery with contrastive multi-objective rewards"};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config_path, "JSON config file (default: desk preset)");
    sub->add_option("--seed", a.seed, "root seed");
    sub->add_option("--out", a.out, "run directory (default: $COMSD_RUN_DIR/<phase>-<env>-seed<n>)");
  };
  auto* pretrain = app.add_subcommand("pretrain", "unsupervised skill discovery");
  add_common(pretrain);
  pretrain->add_option("--steps", a.steps, "environment steps");
  pretrain->add_option("--mode", a.mode, "comsd | no_smw | exploration_only | diversity_only");

  auto* finetune = app.add_subcommand("finetune", "adapt the fixed skill (0,0.5,...,0.5) to a task");
  add_common(finetune);
  finetune->add_option("--steps", a.steps, "environment steps");
  finetune->add_option("--task", a.task, "task id");
  finetune->add_option("--checkpoint", a.checkpoint, "pretrained checkpoint directory")->required();

  auto* combine = app.add_subcommand("combine", "train a meta-controller over frozen skills");
  add_common(combine);
  combine->add_option("--steps", a.steps, "environment steps");
  combine->add_option("--task", a.task, "task id");
  combine->add_option("--checkpoint", a.checkpoint, "pretrained checkpoint directory")->required();

  auto* analyze = app.add_subcommand("analyze", "AKD / MS / coverage metrics of grid-swept skills");
  add_common(analyze);
  analyze->add_option("--checkpoint", a.checkpoint, "pretrained checkpoint directory");
  analyze->add_option("--rollouts", a.rollouts, "rollout CSV written by a previous analyze");
  analyze->add_option("--skills", a.skills, "number of grid-swept skills");

  auto* info = app.add_subcommand("env-info", "print environment constants");
  info->add_option("env_id", a.env_id, "pointmass | planararm")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return Fail(err, 2, "config", e.what());
  }

  try {
    if (info->parsed()) {
      const auto env = MakeEnv(a.env_id);
      out << "env " << env->id() << "\nobs_dim " << env->obs_dim() << "\naction_dim "
          << env->action_dim() << "\nhorizon " << env->horizon() << "\ntasks";
      for (const auto& t : TaskIds(a.env_id)) out << ' ' << t;
      out << '\n';
      return 0;
    }

    if (pretrain->parsed()) {
      const Config c = ResolveConfig(a, "pretrain");
      const auto dir = RunDir(a, c, "pretrain");
      const auto res = Pretrain(c, {dir});
      out << "pretrain done steps=" << res.steps << " updates=" << res.updates
          << " coverage=" << res.coverage << " dir=" << dir.string() << '\n';
      return 0;
    }

    if (finetune->parsed() || combine->parsed()) {
      const bool is_ft = finetune->parsed();
      const std::string phase = is_ft ? "finetune" : "combine";
      Config c = ResolveConfig(a, phase);
      if (!std::filesystem::exists(std::filesystem::path(a.checkpoint) / "manifest.json"))
        return Fail(err, 3, "checkpoint", "missing checkpoint: " + a.checkpoint);
      const Checkpoint ck = LoadCheckpoint(a.checkpoint);
      c = AdoptCheckpointEnv(c, ck);
      const TaskSpec task = MakeTask(c.env_id, c.task);
      const auto dir = RunDir(a, c, phase);
      if (is_ft) {
        const auto res = Finetune(c, ck, task, {dir});
        out << "finetune done task=" << task.task_id << " initial_return=" << res.initial_return
            << " final_return=" << res.final_return << " dir=" << dir.string() << '\n';
      } else {
        const auto res = Combine(c, ck, task, {dir});
        out << "combine done task=" << task.task_id << " random_skill_return="
            << res.random_skill_return << " final_return=" << res.final_return
            << " dir=" << dir.string() << '\n';
      }
      return 0;
    }

    if (analyze->parsed()) {
      if (a.checkpoint.empty() == a.rollouts.empty())
        return Fail(err, 2, "config", "analyze needs exactly one of --checkpoint or --rollouts",
                    "--checkpoint");
      Config c = ResolveConfig(a, "analyze");
      if (a.skills < 2) return Fail(err, 2, "config", "must be >= 2", "--skills");
      std::vector<SkillRollout> rollouts;
      if (!a.checkpoint.empty()) {
        if (!std::filesystem::exists(std::filesystem::path(a.checkpoint) / "manifest.json"))
          return Fail(err, 3, "checkpoint", "missing checkpoint: " + a.checkpoint);
        const Checkpoint ck = LoadCheckpoint(a.checkpoint);
        c = AdoptCheckpointEnv(c, ck);
        const auto env = MakeEnv(c.env_id);
        const DenseNet& actor = ck.net("actor");
        const int d = actor.input_dim() - env->obs_dim();
        if (d < 1) throw CheckpointError("checkpoint actor has no skill input");
        rollouts = RolloutSkills(*env, actor, GridSweep(a.skills, d), c.rollout_episodes, c.seed);
      } else {
        rollouts = ReadRolloutsCsv(a.rollouts);
      }
      const auto env = MakeEnv(c.env_id);
      const auto rep = Analyze(rollouts, *env, c);
      const auto dir = RunDir(a, c, "analyze");
      std::filesystem::create_directories(dir);
      WriteAnalysisCsv(dir / "analysis.csv", rep);
      if (!a.checkpoint.empty()) WriteRolloutsCsv(dir / "rollouts.csv", rollouts);
      out << "analyze done skills=" << rollouts.size() << " ms_coverage=" << rep.ms.coverage
          << " akd_range=" << rep.akd_summary.range << " dir=" << dir.string() << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    return Fail(err, 2, "config", e.what(), e.field());
  } catch (const CheckpointError& e) {
    return Fail(err, 3, "checkpoint", e.what());
  } catch (const std::invalid_argument& e) {
    return Fail(err, 2, "config", e.what());
  } catch (const NumericError& e) {
    return Fail(err, 1, "numeric", e.what());
  } catch (const std::exception& e) {
    return Fail(err, 1, "runtime", e.what());
  }
  return Fail(err, 2, "config", "no subcommand");
}

}  // namespace comsd
