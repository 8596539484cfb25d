#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

namespace cogrisk {

using Vec2 = Eigen::Vector2d;

inline constexpr double kAvMaxSpeed = 6.0;          // m/s
inline constexpr double kPedestrianMaxSpeed = 2.0;  // m/s
inline constexpr double kAccelLimit = 2.0;          // m/s^2
inline constexpr double kMaxHeadingChange = 0.2;    // rad per step
inline constexpr double kDefaultDt = 0.5;           // s
inline constexpr double kAvRadius = 1.0;            // m
inline constexpr double kPedestrianRadius = 0.3;    // m

enum class AgentKind { kAv, kPedestrian };

struct AgentState {
  int id = 0;
  AgentKind kind = AgentKind::kPedestrian;
  Vec2 position = Vec2::Zero();
  double heading = 0.0;  // (-pi, pi]
  double speed = 0.0;
  Vec2 velocity = Vec2::Zero();
  // Signed commanded value for the AV, effective magnitude for pedestrians.
  double acceleration = 0.0;
  double radius = kPedestrianRadius;
  Vec2 goal = Vec2::Zero();

  double max_speed() const { return kind == AgentKind::kAv ? kAvMaxSpeed : kPedestrianMaxSpeed; }
};

double default_radius(AgentKind kind);

// Builds a state with velocity derived from speed and heading.
AgentState make_agent(int id, AgentKind kind, const Vec2& position, double heading, double speed,
                      const Vec2& goal, double radius);
AgentState make_agent(int id, AgentKind kind, const Vec2& position, double heading, double speed,
                      const Vec2& goal);

struct Action {
  double accel = 0.0;     // m/s^2
  double dheading = 0.0;  // rad per step
};

struct WorldState {
  double time = 0.0;
  double dt = kDefaultDt;
  std::vector<AgentState> agents;  // AV first
};

struct RelativeGeometry {
  double d_actual = 0.0;
  // Angle between the other agent's velocity and the vector from the other agent to ego.
  double phi = 0.0;
  // Unit vector from the other agent toward ego.
  Vec2 n_hat{1.0, 0.0};
  // d/dt of the center distance; negative while approaching.
  double closing_rate = 0.0;
  bool degenerate = false;
};

double wrap_angle(double angle);
Action clamp_action(const Action& action);

AgentState step_av(const AgentState& state, const Action& action, double dt);
AgentState step_pedestrian(const AgentState& state, const Vec2& force, double dt);

RelativeGeometry relative_geometry(const AgentState& ego, const AgentState& other);

// First overlapping pair in index order.
std::optional<std::pair<int, int>> detect_collision(const WorldState& world);
std::vector<std::pair<int, int>> all_collisions(const WorldState& world);

void validate_agent(const AgentState& agent);
void validate_world(const WorldState& world);

}  // namespace cogrisk
