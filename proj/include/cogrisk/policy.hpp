#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cogrisk/env.hpp"
#include "cogrisk/rng.hpp"
#include "cogrisk/sac.hpp"

namespace cogrisk {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const Environment& env, const Observation& obs, Rng& rng) = 0;
  virtual std::string name() const = 0;
};

// Holds speed and heading.
class ZeroPolicy : public Policy {
 public:
  Action act(const Environment&, const Observation&, Rng&) override { return {}; }
  std::string name() const override { return "zero"; }
};

struct ScriptedPolicyParams {
  double cruise_speed = 4.0;      // m/s
  double heading_gain = 0.8;      // fraction of heading error corrected per step
  double corridor_length = 12.0;  // m ahead of the AV
  double corridor_half_width = 2.5;
  double stop_margin = 3.0;       // m kept to the nearest pedestrian in the corridor
};

// Steers at the goal and brakes for pedestrians in a forward corridor.
class ScriptedPolicy : public Policy {
 public:
  explicit ScriptedPolicy(ScriptedPolicyParams params = {}) : params_(params) {}
  Action act(const Environment& env, const Observation& obs, Rng& rng) override;
  std::string name() const override { return "scripted"; }

 private:
  ScriptedPolicyParams params_;
};

// Acts with a trained (or freshly initialized) SAC actor.
class SacPolicy : public Policy {
 public:
  SacPolicy(const SacAgent& agent, bool deterministic) : agent_(agent), deterministic_(deterministic) {}
  Action act(const Environment& env, const Observation& obs, Rng& rng) override;
  std::string name() const override { return "sac"; }

 private:
  const SacAgent& agent_;
  bool deterministic_;
};

EpisodeLog run_episode(Environment& env, const Scenario& scenario, Policy& policy,
                       std::uint64_t episode_seed);

// Runs `episodes_per_scenario` seeded episodes on every scenario, in order.
std::vector<EpisodeLog> evaluate(const std::vector<Scenario>& scenarios, Policy& policy,
                                 const EnvConfig& env_config, int episodes_per_scenario,
                                 std::uint64_t seed);

}  // namespace cogrisk
