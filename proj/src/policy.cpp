#include "cogrisk/policy.hpp"

#include <algorithm>
#include <cmath>

#include "cogrisk/error.hpp"

namespace cogrisk {

Action ScriptedPolicy::act(const Environment& env, const Observation&, Rng&) {
  const WorldState& w = env.world();
  const AgentState& av = w.agents.front();
  const Vec2 forward(std::cos(av.heading), std::sin(av.heading));
  double target_speed = params_.cruise_speed;
  for (std::size_t i = 1; i < w.agents.size(); ++i) {
    const Vec2 rel = w.agents[i].position - av.position;
    const double along = rel.dot(forward);
    const double lateral = std::abs(rel.x() * forward.y() - rel.y() * forward.x());
    if (along > 0.0 && along < params_.corridor_length && lateral < params_.corridor_half_width) {
      const double room = std::max(0.0, along - params_.stop_margin);
      target_speed = std::min(target_speed, std::sqrt(2.0 * kAccelLimit * 0.5 * room));
    }
  }
  Action a;
  a.dheading = params_.heading_gain * goal_heading_error(av);
  a.accel = (target_speed - av.speed) / w.dt;
  return clamp_action(a);
}

Action SacPolicy::act(const Environment&, const Observation& obs, Rng& rng) {
  const nn::PolicyOutput out = agent_.act(obs, rng, deterministic_);
  return {out.action[0], out.action[1]};
}

EpisodeLog run_episode(Environment& env, const Scenario& scenario, Policy& policy,
                       std::uint64_t episode_seed) {
  Observation obs = env.reset(scenario, episode_seed);
  Rng rng = make_rng(episode_seed, "policy");
  while (!env.done()) {
    StepResult r = env.step(policy.act(env, obs, rng));
    obs = std::move(r.observation);
  }
  return env.log();
}

std::vector<EpisodeLog> evaluate(const std::vector<Scenario>& scenarios, Policy& policy,
                                 const EnvConfig& env_config, int episodes_per_scenario,
                                 std::uint64_t seed) {
  if (scenarios.empty()) throw ValidationError("evaluation needs at least one scenario");
  if (episodes_per_scenario <= 0) throw ValidationError("episodes per scenario must be > 0");
  Environment env(env_config);
  std::vector<EpisodeLog> logs;
  std::uint64_t index = 0;
  for (const Scenario& s : scenarios) {
    for (int e = 0; e < episodes_per_scenario; ++e) {
      logs.push_back(run_episode(env, s, policy, substream_seed(seed, "eval-episode", index++)));
    }
  }
  return logs;
}

}  // namespace cogrisk
