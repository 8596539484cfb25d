#include "cogrisk/scenarios.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "cogrisk/error.hpp"
#include "cogrisk/rng.hpp"

namespace cogrisk {
namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string scenario_name(const char* prefix, int index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%04d", prefix, index);
  return buf;
}

AgentState walker(int id, const Vec2& start, const Vec2& goal, double speed) {
  const Vec2 d = goal - start;
  return make_agent(id, AgentKind::kPedestrian, start, std::atan2(d.y(), d.x()), speed, goal);
}

// Replay track integrating `velocity(step)` from `start`.
template <typename VelocityFn>
std::vector<ReplaySample> integrate_track(const Vec2& start, int steps, double dt, VelocityFn velocity) {
  std::vector<ReplaySample> track;
  Vec2 p = start;
  for (int k = 0; k <= steps; ++k) {
    const Vec2 v = velocity(k);
    track.push_back({p, v});
    p += v * dt;
  }
  return track;
}

void set_from_replay(AgentState& agent, const std::vector<ReplaySample>& track) {
  agent.position = track.front().position;
  agent.velocity = track.front().velocity;
  agent.speed = agent.velocity.norm();
  if (agent.speed > 0.0) agent.heading = std::atan2(agent.velocity.y(), agent.velocity.x());
}

Scenario crossing(int index, Rng& rng, const GeneratorConfig& c) {
  Scenario s;
  s.id = scenario_name("crossing", index);
  s.dt = c.dt;
  s.max_steps = c.max_steps;
  s.model = c.model;
  s.seed = rng();
  const double av_speed = uniform(rng, 3.0, 5.0);
  const double av_heading = uniform(rng, -0.05, 0.05);
  s.agents.push_back(make_agent(0, AgentKind::kAv, Vec2::Zero(), av_heading, av_speed, Vec2(40.0, 0.0)));
  const int n = std::uniform_int_distribution<int>(c.min_pedestrians, c.max_pedestrians)(rng);
  for (int i = 1; i <= n; ++i) {
    const double x = uniform(rng, 12.0, 32.0);
    const double side = rng() % 2 == 0 ? 1.0 : -1.0;
    const Vec2 start(x, side * uniform(rng, 4.0, 7.0));
    const Vec2 goal(x + uniform(rng, -2.0, 2.0), -side * uniform(rng, 4.0, 7.0));
    s.agents.push_back(walker(i, start, goal, uniform(rng, 0.8, 1.5)));
  }
  return s;
}

// A parked vehicle far from the action; the families only exercise pedestrians.
AgentState parked_vehicle(const Vec2& at) {
  return make_agent(0, AgentKind::kAv, at, 0.0, 0.0, at + Vec2(40.0, 0.0));
}

Scenario collision_family(int index, Rng& rng, const GeneratorConfig& c) {
  Scenario s;
  s.id = scenario_name("collision", index);
  s.dt = c.dt;
  s.max_steps = c.max_steps;
  s.model = c.model;
  s.seed = rng();
  s.agents.push_back(parked_vehicle(Vec2(-10.0, -25.0)));
  s.agents.push_back(walker(1, Vec2(0.0, 0.0), Vec2(14.0, 0.0), uniform(rng, 0.7, 1.3)));
  // A slower walker just ahead on nearly the same line, to be overtaken.
  const double contact = s.agents[1].radius + kPedestrianRadius;
  const Vec2 ghost_start(contact + uniform(rng, 1.5, 3.0), uniform(rng, -0.25, 0.25));
  const Vec2 ghost_velocity(uniform(rng, 0.6, 0.9), 0.0);
  s.agents.push_back(walker(2, ghost_start, ghost_start + Vec2(14.0, 0.0), ghost_velocity.norm()));
  s.replay.assign(s.agents.size(), {});
  s.replay[0] = integrate_track(s.agents[0].position, c.max_steps, c.dt,
                                [](int) { return Vec2::Zero().eval(); });
  s.replay[2] = integrate_track(ghost_start, c.max_steps, c.dt,
                                [&](int) { return ghost_velocity; });
  set_from_replay(s.agents[2], s.replay[2]);
  return s;
}

Scenario latent_family(int index, Rng& rng, const GeneratorConfig& c) {
  Scenario s;
  s.id = scenario_name("latent", index);
  s.dt = c.dt;
  s.max_steps = c.max_steps;
  s.model = c.model;
  s.seed = rng();
  s.agents.push_back(parked_vehicle(Vec2(-10.0, -25.0)));
  const double x0 = uniform(rng, -0.5, 0.5);
  s.agents.push_back(walker(1, Vec2(x0, -5.0), Vec2(x0, 6.0), uniform(rng, 1.1, 1.4)));

  // An erratic walker whose nominal path meets the pedestrian's nominal
  // straight crossing at step `meet`. Its velocity noise comes in cancelling
  // pairs, so the position stays near the nominal path while the motion
  // itself is hard to predict.
  const SfmParams nominal;
  const int meet = std::uniform_int_distribution<int>(6, 8)(rng);
  const Vec2 meet_point(x0, -5.0 + nominal.v0 * c.dt * meet);
  const double angle = uniform(rng, -0.3, 0.3);
  const Vec2 dir(std::cos(angle), std::sin(angle));
  const double cruise = uniform(rng, 1.0, 1.3);
  const double lag = uniform(rng, -0.1, 0.1);
  const Vec2 start = meet_point - cruise * (meet * c.dt + lag) * dir;
  std::vector<Vec2> velocity;
  Vec2 jitter = Vec2::Zero();
  for (int k = 0; k <= c.max_steps; ++k) {
    jitter = k % 2 == 0 ? Vec2(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)) : Vec2(-jitter);
    velocity.push_back(cruise * dir + jitter);
  }
  s.agents.push_back(walker(2, start, start + 20.0 * dir, cruise));
  s.replay.assign(s.agents.size(), {});
  s.replay[0] = integrate_track(s.agents[0].position, c.max_steps, c.dt,
                                [](int) { return Vec2::Zero().eval(); });
  s.replay[2] = integrate_track(start, c.max_steps, c.dt, [&](int k) { return velocity[k]; });
  set_from_replay(s.agents[2], s.replay[2]);
  return s;
}

}  // namespace

std::string to_string(ScenarioTemplate t) {
  switch (t) {
    case ScenarioTemplate::kCrossing: return "crossing";
    case ScenarioTemplate::kSingleCrossing: return "single-crossing";
    case ScenarioTemplate::kCollision: return "collision";
    case ScenarioTemplate::kLatentRisk: return "latent-risk";
  }
  return "unknown";
}

ScenarioTemplate parse_scenario_template(const std::string& name) {
  if (name == "crossing") return ScenarioTemplate::kCrossing;
  if (name == "single-crossing") return ScenarioTemplate::kSingleCrossing;
  if (name == "collision") return ScenarioTemplate::kCollision;
  if (name == "latent-risk") return ScenarioTemplate::kLatentRisk;
  throw ValidationError("unknown scenario template '" + name +
                        "' (expected crossing, single-crossing, collision, latent-risk)");
}

void validate(const GeneratorConfig& c) {
  if (c.min_pedestrians < 1 || c.max_pedestrians < c.min_pedestrians) {
    throw ValidationError("generator pedestrian range must satisfy 1 <= min <= max");
  }
  if (c.max_steps <= 0) throw ValidationError("generator max_steps must be > 0");
  if (!(c.dt > 0.0)) throw ValidationError("generator dt must be > 0");
  if (!(c.train_fraction >= 0.0 && c.train_fraction <= 1.0)) {
    throw ValidationError("train_fraction must be in [0, 1]");
  }
}

Scenario single_crossing_scenario(PedestrianModel model) {
  Scenario s;
  s.id = "single-crossing";
  s.model = model;
  s.max_steps = 60;
  s.agents.push_back(make_agent(0, AgentKind::kAv, Vec2::Zero(), 0.55, 4.0, Vec2(40.0, 0.0)));
  s.agents.push_back(walker(1, Vec2(20.0, -5.0), Vec2(20.0, 6.0), 1.2));
  return s;
}

std::vector<Scenario> generate_scenarios(int count, std::uint64_t seed, const GeneratorConfig& c) {
  validate(c);
  if (count < 0) throw ValidationError("scenario count must be >= 0");
  std::vector<Scenario> out;
  for (int k = 0; k < count; ++k) {
    Rng rng = make_rng(seed, "scenario", static_cast<std::uint64_t>(k));
    Scenario s;
    switch (c.scenario_template) {
      case ScenarioTemplate::kCrossing: s = crossing(k, rng, c); break;
      case ScenarioTemplate::kSingleCrossing:
        s = single_crossing_scenario(c.model);
        s.id = scenario_name("single-crossing", k);
        s.max_steps = c.max_steps;
        s.dt = c.dt;
        break;
      case ScenarioTemplate::kCollision: s = collision_family(k, rng, c); break;
      case ScenarioTemplate::kLatentRisk: s = latent_family(k, rng, c); break;
    }
    validate(s);
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<std::vector<Scenario>, std::vector<Scenario>> split_scenarios(
    const std::vector<Scenario>& scenarios, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ValidationError("train_fraction must be in [0, 1]");
  }
  const auto n_train = static_cast<std::size_t>(
      std::lround(train_fraction * static_cast<double>(scenarios.size())));
  std::pair<std::vector<Scenario>, std::vector<Scenario>> out;
  out.first.assign(scenarios.begin(), scenarios.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.second.assign(scenarios.begin() + static_cast<std::ptrdiff_t>(n_train), scenarios.end());
  return out;
}

}  // namespace cogrisk
