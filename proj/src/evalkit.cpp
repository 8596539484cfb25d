#include "cogrisk/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "cogrisk/error.hpp"

namespace cogrisk {

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kRunning: return "running";
    case Outcome::kSuccess: return "success";
    case Outcome::kCollision: return "collision";
    case Outcome::kTimeout: return "timeout";
  }
  return "running";
}

Outcome parse_outcome(const std::string& name) {
  if (name == "running") return Outcome::kRunning;
  if (name == "success") return Outcome::kSuccess;
  if (name == "collision") return Outcome::kCollision;
  if (name == "timeout") return Outcome::kTimeout;
  throw ValidationError("unknown outcome '" + name + "'");
}

Trajectory agent_trajectory(const EpisodeLog& log, int id) {
  Trajectory out;
  out.reserve(log.steps.size());
  for (const StepRecord& s : log.steps) {
    for (const AgentRecord& a : s.agents) {
      if (a.id == id) {
        out.push_back(a.position);
        break;
      }
    }
  }
  return out;
}

double ade(const Trajectory& simulated, const Trajectory& truth, bool* truncated) {
  if (simulated.empty() || truth.empty()) throw ValidationError("ade of an empty trajectory");
  const std::size_t n = std::min(simulated.size(), truth.size());
  if (truncated) *truncated = simulated.size() != truth.size();
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) sum += (simulated[t] - truth[t]).norm();
  return sum / static_cast<double>(n);
}

double fde(const Trajectory& simulated, const Trajectory& truth) {
  if (simulated.empty() || truth.empty()) throw ValidationError("fde of an empty trajectory");
  const std::size_t t = std::min(simulated.size(), truth.size()) - 1;
  return (simulated[t] - truth.back()).norm();
}

double mean_ade(std::span<const TrajectoryPair> pairs) {
  if (pairs.empty()) throw ValidationError("ade over zero episodes");
  double sum = 0.0;
  for (const TrajectoryPair& p : pairs) sum += ade(p.simulated, p.truth);
  return sum / static_cast<double>(pairs.size());
}

double mean_fde(std::span<const TrajectoryPair> pairs) {
  if (pairs.empty()) throw ValidationError("fde over zero episodes");
  double sum = 0.0;
  for (const TrajectoryPair& p : pairs) sum += fde(p.simulated, p.truth);
  return sum / static_cast<double>(pairs.size());
}

double pedestrian_cr(std::span<const EpisodeLog> logs, std::optional<int> pedestrian_id) {
  if (logs.empty()) throw ValidationError("collision rate over zero episodes");
  int hits = 0;
  for (const EpisodeLog& log : logs) {
    auto simulated_ped = [&](int id) {
      if (pedestrian_id) return id == *pedestrian_id;
      for (const AgentMeta& m : log.agents) {
        if (m.id == id) return m.kind == AgentKind::kPedestrian && !m.ghost;
      }
      return false;
    };
    bool hit = false;
    for (const StepRecord& s : log.steps) {
      for (const auto& [i, j] : s.collisions) {
        if (simulated_ped(i) || simulated_ped(j)) hit = true;
      }
      if (hit) break;
    }
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(logs.size());
}

MetricsReport av_report(std::span<const EpisodeLog> logs) {
  MetricsReport r;
  int success = 0, collision = 0, timeout = 0;
  double speed_sum = 0.0;
  long speed_count = 0;
  double jerk_sum = 0.0;
  long jerk_count = 0;
  double max_accel_sum = 0.0;
  for (const EpisodeLog& log : logs) {
    if (log.outcome == Outcome::kRunning) continue;
    ++r.episodes;
    success += log.outcome == Outcome::kSuccess;
    collision += log.outcome == Outcome::kCollision;
    timeout += log.outcome == Outcome::kTimeout;
    double max_abs = 0.0;
    for (std::size_t t = 0; t < log.steps.size(); ++t) {
      const AgentRecord& av = log.steps[t].agents.front();
      speed_sum += av.speed;
      ++speed_count;
      max_abs = std::max(max_abs, std::abs(av.accel));
      if (t > 0) {
        jerk_sum += std::abs(av.accel - log.steps[t - 1].agents.front().accel) / log.dt;
        ++jerk_count;
      }
    }
    max_accel_sum += max_abs;
  }
  if (r.episodes == 0) throw ValidationError("AV report over zero completed episodes");
  const double n = r.episodes;
  r.success_rate = success / n;
  r.collision_rate = collision / n;
  r.timeout_rate = timeout / n;
  r.avg_speed = speed_count ? speed_sum / static_cast<double>(speed_count) : 0.0;
  r.avg_jerk = jerk_count ? jerk_sum / static_cast<double>(jerk_count) : 0.0;
  r.avg_max_abs_accel = max_accel_sum / n;
  return r;
}

}  // namespace cogrisk
