#include "cogrisk/pedestrians.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cogrisk/error.hpp"

namespace cogrisk {
namespace {

Vec2 exponential_repulsion(const AgentState& target, const AgentState& source, double strength,
                           double range) {
  const RelativeGeometry g = relative_geometry(target, source);
  const double r = target.radius + source.radius;
  return strength * std::exp((r - g.d_actual) / range) * g.n_hat;
}

bool contains(std::span<const int> ids, int id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

}  // namespace

void validate(const SfmParams& p) {
  for (double v : {p.v0, p.tau, p.a_veh, p.b_veh, p.a_ped, p.b_ped}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("SFM parameters must be > 0");
  }
}

std::string to_string(PedestrianModel model) {
  switch (model) {
    case PedestrianModel::kCv: return "cv";
    case PedestrianModel::kSfm: return "sfm";
    case PedestrianModel::kRaSfm: return "ra-sfm";
    case PedestrianModel::kCrSfm: return "cr-sfm";
  }
  return "unknown";
}

PedestrianModel parse_pedestrian_model(const std::string& name) {
  if (name == "cv") return PedestrianModel::kCv;
  if (name == "sfm") return PedestrianModel::kSfm;
  if (name == "ra-sfm" || name == "ra_sfm" || name == "ra") return PedestrianModel::kRaSfm;
  if (name == "cr-sfm" || name == "cr_sfm" || name == "cr") return PedestrianModel::kCrSfm;
  throw ValidationError("unknown pedestrian model '" + name + "'");
}

bool has_arrived(const AgentState& ped) {
  return ped.kind == AgentKind::kPedestrian && (ped.goal - ped.position).norm() < kArrivalRadius;
}

Vec2 goal_force(const AgentState& ped, const SfmParams& params) {
  const Vec2 to_goal = ped.goal - ped.position;
  const double dist = to_goal.norm();
  if (dist < 1e-9) return Vec2::Zero();
  return (params.v0 * to_goal / dist - ped.velocity) / params.tau;
}

Vec2 vehicle_repulsion(const AgentState& ped, const AgentState& av, const SfmParams& params) {
  return exponential_repulsion(ped, av, params.a_veh, params.b_veh);
}

Vec2 pedestrian_repulsion(const AgentState& ped_i, const AgentState& ped_j,
                          const SfmParams& params) {
  return exponential_repulsion(ped_i, ped_j, params.a_ped, params.b_ped);
}

Vec2 total_force(PedestrianModel kind, const AgentState& ped, const WorldState& world,
                 const CognitiveTracker& tracker, const SfmParams& sfm, const RiskParams& risk,
                 std::span<const int> inactive_ids, ForceWeights* weights_out) {
  ForceWeights weights;
  if (kind == PedestrianModel::kCv || contains(inactive_ids, ped.id)) {
    if (weights_out) *weights_out = weights;
    return Vec2::Zero();
  }
  const bool weighted = kind != PedestrianModel::kSfm;
  const bool cognitive = kind == PedestrianModel::kCrSfm;

  Vec2 repulsion = Vec2::Zero();
  double vehicle_weight = 0.0;
  std::vector<double> pedestrian_weights;
  for (const AgentState& other : world.agents) {
    if (other.id == ped.id || contains(inactive_ids, other.id)) continue;
    const bool is_vehicle = other.kind == AgentKind::kAv;
    const Vec2 f = is_vehicle ? vehicle_repulsion(ped, other, sfm)
                              : pedestrian_repulsion(ped, other, sfm);
    double w = 1.0;
    if (weighted) {
      const double u = cognitive ? tracker.uncertainty(other.id).value_or(0.0) : 0.0;
      w = assess_pair(ped, other, u, is_vehicle ? risk.lambda1 : risk.lambda2, risk).weight;
      if (is_vehicle) {
        vehicle_weight = std::max(vehicle_weight, w);
      } else {
        pedestrian_weights.push_back(w);
      }
    }
    if (is_vehicle) {
      weights.vehicle = w;
    } else {
      weights.pedestrians.emplace_back(other.id, w);
    }
    repulsion += w * f;
  }
  weights.goal = weighted ? goal_weight(vehicle_weight, pedestrian_weights, risk) : 1.0;
  if (weights_out) *weights_out = weights;
  return weights.goal * goal_force(ped, sfm) + repulsion;
}

AgentState cv_step(const AgentState& ped, const Vec2& initial_velocity, double dt) {
  AgentState next = ped;
  next.velocity = initial_velocity;
  next.speed = initial_velocity.norm();
  if (next.speed > 0.0) next.heading = wrap_angle(std::atan2(initial_velocity.y(), initial_velocity.x()));
  next.position = ped.position + initial_velocity * dt;
  next.acceleration = 0.0;
  return next;
}

}  // namespace cogrisk
