#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace comsd {

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

// One line of metrics.csv. Fields that do not apply to a phase are NaN and
// written as empty cells.
struct MetricsRow {
  std::int64_t step = 0;
  std::string phase;
  double r_exploration = kNotApplicable;
  double r_diversity = kNotApplicable;
  double r_intrinsic = kNotApplicable;
  double nce_objective = kNotApplicable;
  double critic_loss = kNotApplicable;
  double actor_loss = kNotApplicable;
  double episode_return = kNotApplicable;
  double coverage = kNotApplicable;
};

inline constexpr const char* kMetricsHeader =
    "step,phase,r_exploration,r_diversity,r_intrinsic,nce_objective,critic_loss,actor_loss,"
    "episode_return,coverage";

inline std::string FormatCell(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string FormatRow(const MetricsRow& r) {
  std::string s = std::to_string(r.step) + "," + r.phase;
  for (double v : {r.r_exploration, r.r_diversity, r.r_intrinsic, r.nce_objective, r.critic_loss,
                   r.actor_loss, r.episode_return, r.coverage})
    s += "," + FormatCell(v);
  return s;
}

// Appends rows to <dir>/metrics.csv as they are produced; wall-clock time
// goes to the separate timing.csv so metrics.csv stays reproducible.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::filesystem::path& dir) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    csv_.open(dir / "metrics.csv", std::ios::trunc);
    csv_ << kMetricsHeader << '\n';
    timing_.open(dir / "timing.csv", std::ios::trunc);
    timing_ << "step,wall_clock_seconds\n";
  }

  void Write(const MetricsRow& row, double wall_seconds) {
    rows_.push_back(row);
    if (csv_.is_open()) {
      csv_ << FormatRow(row) << '\n';
      csv_.flush();
      timing_ << row.step << ',' << FormatCell(wall_seconds) << '\n';
      timing_.flush();
    }
  }

  const std::vector<MetricsRow>& rows() const { return rows_; }

 private:
  std::ofstream csv_;
  std::ofstream timing_;
  std::vector<MetricsRow> rows_;
};

// running mean of a scalar between two log rows
struct MeanAccumulator {
  double sum = 0.0;
  long n = 0;
  void Add(double v) {
    sum += v;
    ++n;
  }
  double Take() {
    const double m = n ? sum / static_cast<double>(n) : kNotApplicable;
    sum = 0.0;
    n = 0;
    return m;
  }
};

}  // namespace comsd
