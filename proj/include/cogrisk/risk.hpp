#pragma once

#include <Eigen/Core>
#include <span>

#include "cogrisk/world.hpp"

namespace cogrisk {

using Matrix = Eigen::MatrixXd;

struct RiskParams {
  double gamma1 = 0.4;      // motion sensitivity of the virtual distance
  double gamma2 = 0.5;      // 1/m, distance decay of physical risk
  double lambda1 = 1.0;     // uncertainty gain, vehicle repulsion
  double lambda2 = 1.0;     // uncertainty gain, pedestrian repulsion
  double lambda3 = 1.5;     // goal-weight decay
  double lambda_adj = 1.0;  // uncertainty gain in the policy graph
};

void validate(const RiskParams& params);

struct RiskAssessment {
  double psi = 0.0;
  double u = 0.0;
  double weight = 0.0;
};

// Scale the actual distance by the other agent's motion: shrinks when it
// approaches, grows when it moves away. Always within [0, 2 * d_actual).
double virtual_distance(const RelativeGeometry& geom, double other_speed, double other_accel_mag,
                        const RiskParams& params);

double physical_risk(double d_virtual, const RiskParams& params);

double fused_weight(double psi, double u, double lambda);

double goal_weight(double w_veh, std::span<const double> w_peds, const RiskParams& params);

// Physical risk posed by `other` to `ego`.
double pair_physical_risk(const AgentState& ego, const AgentState& other, const RiskParams& params);

RiskAssessment assess_pair(const AgentState& ego, const AgentState& other, double u, double lambda,
                           const RiskParams& params);

inline constexpr int kNodeFeatureDim = 9;
inline constexpr double kPositionScale = 30.0;
inline constexpr double kSpeedScale = 6.0;
inline constexpr double kAccelScale = 2.0;

struct InteractionGraph {
  Matrix node_features;  // N x 9, row 0 is the AV
  Matrix adjacency;      // N x N, zero diagonal
  Matrix normalized;     // D^-1/2 (A + I) D^-1/2
};

// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
Matrix normalize_adjacency(const Matrix& adjacency);

// Fused-risk adjacency: A(i,j) = psi(i <- j) * (1 + lambda_adj * u(i,j)).
// `uncertainties(i, j)` is agent i's uncertainty about agent j.
Matrix risk_adjacency(const WorldState& world, const Matrix& uncertainties, const RiskParams& params);

// All-ones off-diagonal adjacency used by the uniform-graph ablation.
Matrix uniform_adjacency(int n);

// Per-agent features [x, y, cos, sin, speed, accel, goal_dx, goal_dy, is_av], positions
// relative to the AV goal.
Matrix node_features(const WorldState& world);

InteractionGraph build_adjacency(const WorldState& world, const Matrix& uncertainties,
                                 const RiskParams& params);

}  // namespace cogrisk
