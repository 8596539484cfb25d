#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cogrisk/cognition.hpp"
#include "cogrisk/evalkit.hpp"
#include "cogrisk/neural.hpp"
#include "cogrisk/pedestrians.hpp"
#include "cogrisk/risk.hpp"
#include "cogrisk/rng.hpp"
#include "cogrisk/world.hpp"

namespace cogrisk {

struct RewardParams {
  double w_progress = 1.0;    // per metre of goal progress
  double r_success = 10.0;
  double r_collision = -20.0;
  double w_step = 0.05;       // per-step time penalty
  double w_jerk = 0.05;       // s^3/m
};

void validate(const RewardParams& params);

// Recorded motion of a replayed ("ghost") agent, one sample per step.
struct ReplaySample {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
};

struct Scenario {
  std::string id = "scenario";
  double dt = kDefaultDt;
  std::vector<AgentState> agents;                 // AV first
  std::vector<std::vector<ReplaySample>> replay;  // per agent; empty = simulated
  PedestrianModel model = PedestrianModel::kCrSfm;
  int max_steps = 60;
  std::uint64_t seed = 0;

  bool is_ghost(int id) const;
};

void validate(const Scenario& scenario);

enum class GraphMode { kRisk, kUniform };

std::string to_string(GraphMode mode);
GraphMode parse_graph_mode(const std::string& name);

struct EnvConfig {
  SfmParams sfm;
  RiskParams risk;
  CognitionParams cognition;
  RewardParams reward;
  double goal_radius = 2.0;
  GraphMode graph_mode = GraphMode::kRisk;
  // Seeded perturbation of simulated pedestrians' initial state at reset.
  double jitter_position = 0.0;  // m, std dev per component
  double jitter_speed = 0.0;     // m/s, std dev
  // Per-step Gaussian velocity noise on simulated pedestrians, m/s std dev.
  double pedestrian_noise = 0.0;
};

struct Observation {
  Matrix node_features;  // N x 9
  Matrix adjacency;      // raw A
  Matrix normalized;     // D^-1/2 (A + I) D^-1/2
  Vec2 av_extras = Vec2::Zero();  // [d_goal / 30, heading error / pi]

  nn::GraphSample sample() const { return {&node_features, &normalized, av_extras}; }
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Outcome outcome = Outcome::kRunning;
};

double goal_distance(const AgentState& av);
double goal_heading_error(const AgentState& av);

double reward(const WorldState& prev, const Action& action, const WorldState& next,
              Outcome outcome, const RewardParams& params);

// Collision beats success beats timeout. Collisions and arrivals of replayed
// agents are ignored.
Outcome check_termination(const WorldState& world, int step_index, const Scenario& scenario,
                          double goal_radius);

/// The navigation MDP: one AV, n pedestrians, one cognitive tracker per agent.
class Environment {
 public:
  explicit Environment(EnvConfig config = {});

  Observation reset(const Scenario& scenario);
  Observation reset(const Scenario& scenario, std::uint64_t episode_seed);
  StepResult step(const Action& action);

  const WorldState& world() const { return world_; }
  const EpisodeLog& log() const { return log_; }
  const EnvConfig& config() const { return config_; }
  // uncertainties()(i, j): agent i's latest uncertainty about agent j.
  const Matrix& uncertainties() const { return uncertainties_; }
  const CognitiveTracker& tracker(int id) const { return trackers_.at(id); }
  const Scenario& scenario() const { return scenario_; }
  bool done() const { return outcome_ != Outcome::kRunning; }
  Outcome outcome() const { return outcome_; }
  int step_index() const { return step_index_; }

  Observation observe() const;

 private:
  void replay_agent(AgentState& agent, int step) const;
  // Risk terms see every agent's kinematic acceleration |dv|/dt; for the AV
  // that replaces the signed commanded value.
  WorldState perceived(const WorldState& world) const;
  void record_step(const Action& action, double reward,
                   const std::vector<std::pair<int, int>>& collisions);

  EnvConfig config_;
  Scenario scenario_;
  WorldState world_;
  std::vector<CognitiveTracker> trackers_;
  std::vector<Vec2> initial_velocities_;
  std::vector<bool> frozen_;
  Matrix uncertainties_;
  Rng noise_rng_;
  double av_observed_accel_ = 0.0;
  int step_index_ = 0;
  Outcome outcome_ = Outcome::kRunning;
  bool started_ = false;
  EpisodeLog log_;
};

}  // namespace cogrisk
