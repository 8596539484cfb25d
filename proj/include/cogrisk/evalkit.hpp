#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cogrisk/world.hpp"

namespace cogrisk {

enum class Outcome { kRunning, kSuccess, kCollision, kTimeout };

std::string to_string(Outcome outcome);
Outcome parse_outcome(const std::string& name);

struct AgentRecord {
  int id = 0;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;
  std::vector<AgentRecord> agents;
  Action action;  // action that produced this state; zero for step 0
  double reward = 0.0;
  std::vector<std::tuple<int, int, double>> uncertainties;  // (observer, observed, u), u > 0 only
  std::vector<std::pair<int, int>> collisions;
};

struct AgentMeta {
  int id = 0;
  AgentKind kind = AgentKind::kPedestrian;
  double radius = kPedestrianRadius;
  Vec2 goal = Vec2::Zero();
  bool ghost = false;  // replayed verbatim rather than simulated
};

struct EpisodeLog {
  std::string scenario_id;
  std::uint64_t seed = 0;
  double dt = kDefaultDt;
  std::string pedestrian_model;
  std::vector<AgentMeta> agents;
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::kRunning;
};

using Trajectory = std::vector<Vec2>;

Trajectory agent_trajectory(const EpisodeLog& log, int id);

// Mean displacement over the common prefix. `truncated` reports a length mismatch.
double ade(const Trajectory& simulated, const Trajectory& truth, bool* truncated = nullptr);
// Displacement at truth's final index (or the simulated end if it stops earlier).
double fde(const Trajectory& simulated, const Trajectory& truth);

struct TrajectoryPair {
  Trajectory simulated;
  Trajectory truth;
};

// Mean of per-episode values.
double mean_ade(std::span<const TrajectoryPair> pairs);
double mean_fde(std::span<const TrajectoryPair> pairs);

// Fraction of episodes with any collision involving a simulated pedestrian
// (or only `pedestrian_id` when given).
double pedestrian_cr(std::span<const EpisodeLog> logs, std::optional<int> pedestrian_id = {});

struct MetricsReport {
  int episodes = 0;
  std::optional<double> ade;
  std::optional<double> fde;
  std::optional<double> cr;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double avg_speed = 0.0;
  double avg_jerk = 0.0;
  double avg_max_abs_accel = 0.0;
};

// AV-side metrics over completed episodes (agent 0 is the AV).
MetricsReport av_report(std::span<const EpisodeLog> logs);

}  // namespace cogrisk
