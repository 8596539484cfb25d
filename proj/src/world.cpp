#include "cogrisk/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cogrisk/error.hpp"

namespace cogrisk {
namespace {

constexpr double kDegenerateDistance = 1e-9;

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw ValidationError(std::string("non-finite ") + what);
}

}  // namespace

double default_radius(AgentKind kind) {
  return kind == AgentKind::kAv ? kAvRadius : kPedestrianRadius;
}

AgentState make_agent(int id, AgentKind kind, const Vec2& position, double heading, double speed,
                      const Vec2& goal) {
  return make_agent(id, kind, position, heading, speed, goal, default_radius(kind));
}

AgentState make_agent(int id, AgentKind kind, const Vec2& position, double heading, double speed,
                      const Vec2& goal, double radius) {
  AgentState a;
  a.id = id;
  a.kind = kind;
  a.position = position;
  a.heading = wrap_angle(heading);
  a.speed = speed;
  a.velocity = speed * Vec2(std::cos(a.heading), std::sin(a.heading));
  a.goal = goal;
  a.radius = radius;
  return a;
}

double wrap_angle(double angle) {
  double w = std::remainder(angle, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

Action clamp_action(const Action& action) {
  require_finite(action.accel, "action accel");
  require_finite(action.dheading, "action heading change");
  return {std::clamp(action.accel, -kAccelLimit, kAccelLimit),
          std::clamp(action.dheading, -kMaxHeadingChange, kMaxHeadingChange)};
}

AgentState step_av(const AgentState& state, const Action& action, double dt) {
  validate_agent(state);
  require_finite(action.accel, "action accel");
  require_finite(action.dheading, "action heading change");
  require_finite(dt, "dt");
  AgentState next = state;
  next.heading = wrap_angle(state.heading + action.dheading);
  next.speed = std::clamp(state.speed + action.accel * dt, 0.0, kAvMaxSpeed);
  next.velocity = next.speed * Vec2(std::cos(next.heading), std::sin(next.heading));
  next.position = state.position + next.velocity * dt;
  next.acceleration = action.accel;
  return next;
}

AgentState step_pedestrian(const AgentState& state, const Vec2& force, double dt) {
  validate_agent(state);
  if (!finite(force)) throw ValidationError("non-finite pedestrian force");
  require_finite(dt, "dt");
  AgentState next = state;
  Vec2 v = state.velocity + force * dt;
  const double speed = v.norm();
  if (speed > kPedestrianMaxSpeed) v *= kPedestrianMaxSpeed / speed;
  next.velocity = v;
  next.speed = v.norm();
  next.position = state.position + v * dt;
  if (next.speed > 0.0) next.heading = wrap_angle(std::atan2(v.y(), v.x()));
  next.acceleration = dt > 0.0 ? (v - state.velocity).norm() / dt : 0.0;
  return next;
}

RelativeGeometry relative_geometry(const AgentState& ego, const AgentState& other) {
  if (ego.id == other.id) throw ValidationError("relative geometry of an agent with itself");
  RelativeGeometry g;
  const Vec2 offset = ego.position - other.position;
  g.d_actual = offset.norm();
  if (g.d_actual < kDegenerateDistance) {
    g.degenerate = true;
    g.n_hat = Vec2(1.0, 0.0);
  } else {
    g.n_hat = offset / g.d_actual;
  }
  g.closing_rate = g.n_hat.dot(ego.velocity - other.velocity);
  const double other_speed = other.velocity.norm();
  if (other_speed > 0.0) {
    const double c = std::clamp(other.velocity.dot(g.n_hat) / other_speed, -1.0, 1.0);
    g.phi = std::acos(c);
  }
  return g;
}

std::vector<std::pair<int, int>> all_collisions(const WorldState& world) {
  std::vector<std::pair<int, int>> hits;
  const auto& a = world.agents;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if ((a[i].position - a[j].position).norm() < a[i].radius + a[j].radius) {
        hits.emplace_back(a[i].id, a[j].id);
      }
    }
  }
  return hits;
}

std::optional<std::pair<int, int>> detect_collision(const WorldState& world) {
  const auto& a = world.agents;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if ((a[i].position - a[j].position).norm() < a[i].radius + a[j].radius) {
        return std::make_pair(a[i].id, a[j].id);
      }
    }
  }
  return std::nullopt;
}

void validate_agent(const AgentState& agent) {
  if (!finite(agent.position) || !finite(agent.velocity) || !finite(agent.goal) ||
      !std::isfinite(agent.heading) || !std::isfinite(agent.speed) ||
      !std::isfinite(agent.acceleration) || !std::isfinite(agent.radius)) {
    throw ValidationError("agent " + std::to_string(agent.id) + " has non-finite state");
  }
  if (agent.radius <= 0.0) {
    throw ValidationError("agent " + std::to_string(agent.id) + " has non-positive radius");
  }
  if (agent.speed < 0.0) {
    throw ValidationError("agent " + std::to_string(agent.id) + " has negative speed");
  }
}

void validate_world(const WorldState& world) {
  if (!(world.dt > 0.0) || !std::isfinite(world.dt)) throw ValidationError("dt must be positive");
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    validate_agent(world.agents[i]);
    if (world.agents[i].id != static_cast<int>(i)) {
      throw ValidationError("agent ids must be contiguous from 0 in list order");
    }
  }
}

}  // namespace cogrisk
