#pragma once

#include <span>
#include <string>

#include "cogrisk/cognition.hpp"
#include "cogrisk/risk.hpp"
#include "cogrisk/world.hpp"

namespace cogrisk {

struct SfmParams {
  double v0 = 1.4;     // desired speed, m/s
  double tau = 0.5;    // relaxation time, s
  double a_veh = 3.0;  // vehicle repulsion strength, m/s^2
  double b_veh = 2.0;  // vehicle repulsion range, m
  double a_ped = 2.0;  // pedestrian repulsion strength, m/s^2
  double b_ped = 0.8;  // pedestrian repulsion range, m
};

void validate(const SfmParams& params);

enum class PedestrianModel { kCv, kSfm, kRaSfm, kCrSfm };

std::string to_string(PedestrianModel model);
PedestrianModel parse_pedestrian_model(const std::string& name);

inline constexpr double kArrivalRadius = 0.5;

bool has_arrived(const AgentState& ped);

Vec2 goal_force(const AgentState& ped, const SfmParams& params);
Vec2 vehicle_repulsion(const AgentState& ped, const AgentState& av, const SfmParams& params);
Vec2 pedestrian_repulsion(const AgentState& ped_i, const AgentState& ped_j,
                          const SfmParams& params);

// Per-force weights used by the risk-weighted variants.
struct ForceWeights {
  double goal = 1.0;
  double vehicle = 0.0;
  std::vector<std::pair<int, double>> pedestrians;
};

// Resultant force on `ped`. CV returns zero (the caller holds velocity);
// SFM sums the unweighted terms; RA-SFM weights by physical risk alone;
// CR-SFM amplifies the weights with the tracker's uncertainties.
// Agents listed in `inactive_ids` neither exert nor receive forces.
Vec2 total_force(PedestrianModel kind, const AgentState& ped, const WorldState& world,
                 const CognitiveTracker& tracker, const SfmParams& sfm, const RiskParams& risk,
                 std::span<const int> inactive_ids = {}, ForceWeights* weights_out = nullptr);

AgentState cv_step(const AgentState& ped, const Vec2& initial_velocity, double dt);

}  // namespace cogrisk
