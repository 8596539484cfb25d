#include "cogrisk/env.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "cogrisk/error.hpp"
#include "cogrisk/rng.hpp"

namespace cogrisk {

void validate(const RewardParams& p) {
  for (double v : {p.w_progress, p.r_success, p.r_collision, p.w_step, p.w_jerk}) {
    if (!std::isfinite(v)) throw ValidationError("reward parameters must be finite");
  }
  if (!(p.r_collision < 0.0 && 0.0 < p.r_success)) {
    throw ValidationError("reward requires r_collision < 0 < r_success");
  }
}

bool Scenario::is_ghost(int id) const {
  return id >= 0 && static_cast<std::size_t>(id) < replay.size() && !replay[id].empty();
}

void validate(const Scenario& s) {
  if (s.agents.empty()) throw ValidationError("scenario " + s.id + " has no agents");
  if (s.max_steps <= 0) throw ValidationError("scenario " + s.id + ": max_steps must be > 0");
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ValidationError("scenario dt must be > 0");
  if (s.agents.front().kind != AgentKind::kAv) {
    throw ValidationError("scenario " + s.id + ": agent 0 must be the AV");
  }
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const AgentState& a = s.agents[i];
    validate_agent(a);
    if (a.id != static_cast<int>(i)) throw ValidationError("agent ids must be contiguous from 0");
    if (i > 0 && a.kind != AgentKind::kPedestrian) {
      throw ValidationError("scenario " + s.id + ": only agent 0 may be the AV");
    }
    if (a.speed > a.max_speed() + 1e-9) {
      throw ValidationError("agent " + std::to_string(i) + " exceeds its maximum speed");
    }
  }
  if (!s.replay.empty() && s.replay.size() != s.agents.size()) {
    throw ValidationError("replay list must have one entry per agent");
  }
  for (const auto& r : s.replay) {
    for (const ReplaySample& p : r) {
      if (!std::isfinite(p.position.x()) || !std::isfinite(p.position.y()) ||
          !std::isfinite(p.velocity.x()) || !std::isfinite(p.velocity.y())) {
        throw ValidationError("non-finite replay sample in scenario " + s.id);
      }
    }
  }
}

std::string to_string(GraphMode mode) { return mode == GraphMode::kRisk ? "risk" : "uniform"; }

GraphMode parse_graph_mode(const std::string& name) {
  if (name == "risk") return GraphMode::kRisk;
  if (name == "uniform") return GraphMode::kUniform;
  throw ValidationError("unknown graph mode '" + name + "'");
}

double goal_distance(const AgentState& av) { return (av.goal - av.position).norm(); }

double goal_heading_error(const AgentState& av) {
  const Vec2 d = av.goal - av.position;
  if (d.norm() < 1e-9) return 0.0;
  return wrap_angle(std::atan2(d.y(), d.x()) - av.heading);
}

double reward(const WorldState& prev, const Action& /*action*/, const WorldState& next,
              Outcome outcome, const RewardParams& params) {
  const AgentState& a0 = prev.agents.front();
  const AgentState& a1 = next.agents.front();
  double r = params.w_progress * (goal_distance(a0) - goal_distance(a1)) - params.w_step -
             params.w_jerk * std::abs(a1.acceleration - a0.acceleration) / next.dt;
  if (outcome == Outcome::kSuccess) r += params.r_success;
  if (outcome == Outcome::kCollision) r += params.r_collision;
  return r;
}

Outcome check_termination(const WorldState& world, int step_index, const Scenario& scenario,
                          double goal_radius) {
  const bool av_ghost = scenario.is_ghost(0);
  if (!av_ghost) {
    for (const auto& [i, j] : all_collisions(world)) {
      if ((i == 0 && !scenario.is_ghost(j)) || (j == 0 && !scenario.is_ghost(i))) {
        return Outcome::kCollision;
      }
    }
    if (goal_distance(world.agents.front()) < goal_radius) return Outcome::kSuccess;
  }
  if (step_index >= scenario.max_steps) return Outcome::kTimeout;
  return Outcome::kRunning;
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  validate(config_.sfm);
  validate(config_.risk);
  validate(config_.cognition);
  validate(config_.reward);
  if (!(config_.goal_radius > 0.0)) throw ValidationError("goal_radius must be > 0");
  if (!(config_.jitter_position >= 0.0) || !(config_.jitter_speed >= 0.0) ||
      !(config_.pedestrian_noise >= 0.0)) {
    throw ValidationError("jitter and noise levels must be >= 0");
  }
}

Observation Environment::reset(const Scenario& scenario) { return reset(scenario, scenario.seed); }

Observation Environment::reset(const Scenario& scenario, std::uint64_t episode_seed) {
  validate(scenario);
  scenario_ = scenario;
  world_ = WorldState{0.0, scenario.dt, scenario.agents};
  const std::size_t n = world_.agents.size();

  Rng rng = make_rng(episode_seed, "reset-jitter");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (AgentState& a : world_.agents) {
    if (scenario_.is_ghost(a.id)) {
      replay_agent(a, 0);
      continue;
    }
    if (a.kind != AgentKind::kPedestrian) continue;
    if (config_.jitter_position > 0.0 || config_.jitter_speed > 0.0) {
      const double dx = normal(rng) * config_.jitter_position;
      const double dy = normal(rng) * config_.jitter_position;
      const double ds = normal(rng) * config_.jitter_speed;
      a.position += Vec2(dx, dy);
      a.speed = std::clamp(a.speed + ds, 0.0, kPedestrianMaxSpeed);
      a.velocity = a.speed * Vec2(std::cos(a.heading), std::sin(a.heading));
    }
  }

  trackers_.assign(n, CognitiveTracker(config_.cognition));
  initial_velocities_.clear();
  for (const AgentState& a : world_.agents) initial_velocities_.push_back(a.velocity);
  frozen_.assign(n, false);
  for (const AgentState& a : world_.agents) {
    if (!scenario_.is_ghost(a.id) && has_arrived(a)) frozen_[a.id] = true;
  }
  uncertainties_ = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  noise_rng_ = make_rng(episode_seed, "pedestrian-noise");
  av_observed_accel_ = 0.0;
  step_index_ = 0;
  outcome_ = Outcome::kRunning;
  started_ = true;

  log_ = EpisodeLog{};
  log_.scenario_id = scenario_.id;
  log_.seed = episode_seed;
  log_.dt = scenario_.dt;
  log_.pedestrian_model = to_string(scenario_.model);
  for (const AgentState& a : world_.agents) {
    log_.agents.push_back({a.id, a.kind, a.radius, a.goal, scenario_.is_ghost(a.id)});
  }
  record_step(Action{}, 0.0, all_collisions(world_));
  return observe();
}

void Environment::replay_agent(AgentState& agent, int step) const {
  const auto& track = scenario_.replay[agent.id];
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(step), track.size() - 1);
  const Vec2 prev_velocity = agent.velocity;
  agent.position = track[k].position;
  // Past the end of the recording the agent holds its last position.
  agent.velocity = static_cast<std::size_t>(step) < track.size() ? track[k].velocity : Vec2::Zero();
  agent.speed = agent.velocity.norm();
  if (agent.speed > 0.0) agent.heading = wrap_angle(std::atan2(agent.velocity.y(), agent.velocity.x()));
  agent.acceleration = step > 0 ? (agent.velocity - prev_velocity).norm() / scenario_.dt : 0.0;
}

StepResult Environment::step(const Action& raw_action) {
  if (!started_ || outcome_ != Outcome::kRunning) {
    throw ContractError("step() called on a finished or unstarted episode");
  }
  const Action action = clamp_action(raw_action);
  const WorldState prev = world_;
  const std::size_t n = world_.agents.size();

  // Every agent observes every other agent's current velocity.
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, Vec2> observed;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) observed.emplace(static_cast<int>(j), prev.agents[j].velocity);
    }
    for (const auto& [j, u] : trackers_[i].step(observed)) {
      uncertainties_(static_cast<Eigen::Index>(i), j) = u;
    }
  }

  // A replayed pedestrian standing at its goal counts as arrived, like a frozen live one.
  std::vector<int> inactive;
  for (std::size_t i = 0; i < n; ++i) {
    const AgentState& a = prev.agents[i];
    const bool resting_ghost = scenario_.is_ghost(a.id) && has_arrived(a) && a.speed == 0.0;
    if (frozen_[i] || resting_ghost) inactive.push_back(static_cast<int>(i));
  }
  const WorldState seen = perceived(prev);

  // Synchronous pedestrian update from the pre-step snapshot.
  for (std::size_t i = 1; i < n; ++i) {
    AgentState& ped = world_.agents[i];
    if (scenario_.is_ghost(ped.id)) {
      replay_agent(ped, step_index_ + 1);
      continue;
    }
    if (frozen_[i]) continue;
    if (scenario_.model == PedestrianModel::kCv) {
      ped = cv_step(prev.agents[i], initial_velocities_[i], world_.dt);
    } else {
      const Vec2 force = total_force(scenario_.model, seen.agents[i], seen, trackers_[i],
                                     config_.sfm, config_.risk, inactive);
      ped = step_pedestrian(prev.agents[i], force, world_.dt);
    }
    if (config_.pedestrian_noise > 0.0) {
      std::normal_distribution<double> normal(0.0, config_.pedestrian_noise);
      Vec2 v = ped.velocity + Vec2(normal(noise_rng_), normal(noise_rng_));
      if (v.norm() > kPedestrianMaxSpeed) v *= kPedestrianMaxSpeed / v.norm();
      ped.position += (v - ped.velocity) * world_.dt;
      ped.velocity = v;
      ped.speed = v.norm();
      ped.acceleration = (v - prev.agents[i].velocity).norm() / world_.dt;
      if (ped.speed > 0.0) ped.heading = wrap_angle(std::atan2(v.y(), v.x()));
    }
    if (has_arrived(ped)) {
      frozen_[i] = true;
      ped.velocity.setZero();
      ped.speed = 0.0;
    }
  }

  if (scenario_.is_ghost(0)) {
    replay_agent(world_.agents[0], step_index_ + 1);
  } else {
    world_.agents[0] = step_av(prev.agents[0], action, world_.dt);
  }

  av_observed_accel_ = (world_.agents[0].velocity - prev.agents[0].velocity).norm() / world_.dt;
  ++step_index_;
  world_.time = prev.time + world_.dt;

  const auto collisions = all_collisions(world_);
  outcome_ = check_termination(world_, step_index_, scenario_, config_.goal_radius);
  const double r = reward(prev, action, world_, outcome_, config_.reward);
  record_step(action, r, collisions);
  if (outcome_ != Outcome::kRunning) log_.outcome = outcome_;

  StepResult result;
  result.observation = observe();
  result.reward = r;
  result.outcome = outcome_;
  result.done = outcome_ != Outcome::kRunning;
  return result;
}

WorldState Environment::perceived(const WorldState& world) const {
  WorldState w = world;
  if (!scenario_.is_ghost(0)) w.agents[0].acceleration = av_observed_accel_;
  return w;
}

Observation Environment::observe() const {
  Observation obs;
  obs.node_features = node_features(world_);
  const int n = static_cast<int>(world_.agents.size());
  obs.adjacency = config_.graph_mode == GraphMode::kRisk
                      ? risk_adjacency(perceived(world_), uncertainties_, config_.risk)
                      : uniform_adjacency(n);
  obs.normalized = normalize_adjacency(obs.adjacency);
  const AgentState& av = world_.agents.front();
  obs.av_extras = Vec2(goal_distance(av) / kPositionScale, goal_heading_error(av) / std::numbers::pi);
  return obs;
}

void Environment::record_step(const Action& action, double r,
                              const std::vector<std::pair<int, int>>& collisions) {
  StepRecord rec;
  rec.step = step_index_;
  rec.time = world_.time;
  rec.action = action;
  rec.reward = r;
  rec.collisions = collisions;
  for (const AgentState& a : world_.agents) {
    rec.agents.push_back({a.id, a.position, a.velocity, a.heading, a.speed, a.acceleration});
  }
  for (Eigen::Index i = 0; i < uncertainties_.rows(); ++i) {
    for (Eigen::Index j = 0; j < uncertainties_.cols(); ++j) {
      if (uncertainties_(i, j) > 0.0) {
        rec.uncertainties.emplace_back(static_cast<int>(i), static_cast<int>(j), uncertainties_(i, j));
      }
    }
  }
  log_.steps.push_back(std::move(rec));
}

}  // namespace cogrisk
