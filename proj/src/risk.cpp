#include "cogrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cogrisk/error.hpp"

namespace cogrisk {

void validate(const RiskParams& p) {
  auto check = [](double v, bool strict, const char* name) {
    if (!std::isfinite(v) || (strict ? !(v > 0.0) : !(v >= 0.0))) {
      throw ValidationError(std::string("risk parameter ") + name + " out of range");
    }
  };
  check(p.gamma1, true, "gamma1");
  check(p.gamma2, true, "gamma2");
  check(p.lambda1, false, "lambda1");
  check(p.lambda2, false, "lambda2");
  check(p.lambda3, false, "lambda3");
  check(p.lambda_adj, false, "lambda_adj");
}

double virtual_distance(const RelativeGeometry& geom, double other_speed, double other_accel_mag,
                        const RiskParams& params) {
  const double k = geom.closing_rate >= 0.0 ? 1.0 : -1.0;
  const double motion = other_speed * std::abs(std::cos(geom.phi)) + std::abs(other_accel_mag);
  return geom.d_actual * (1.0 + std::tanh(params.gamma1 * k * motion));
}

double physical_risk(double d_virtual, const RiskParams& params) {
  return 1.0 / (1.0 + params.gamma2 * d_virtual);
}

double fused_weight(double psi, double u, double lambda) { return psi * (1.0 + lambda * u); }

double goal_weight(double w_veh, std::span<const double> w_peds, const RiskParams& params) {
  double worst = w_veh;
  for (double w : w_peds) worst = std::max(worst, w);
  return std::exp(-params.lambda3 * worst);
}

double pair_physical_risk(const AgentState& ego, const AgentState& other, const RiskParams& params) {
  const RelativeGeometry g = relative_geometry(ego, other);
  return physical_risk(virtual_distance(g, other.velocity.norm(), other.acceleration, params), params);
}

RiskAssessment assess_pair(const AgentState& ego, const AgentState& other, double u, double lambda,
                           const RiskParams& params) {
  RiskAssessment r;
  r.psi = pair_physical_risk(ego, other, params);
  r.u = u;
  r.weight = fused_weight(r.psi, u, lambda);
  return r;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ValidationError("adjacency must be square");
  const Eigen::Index n = adjacency.rows();
  Matrix tilde = adjacency + Matrix::Identity(n, n);
  Eigen::VectorXd inv_sqrt = tilde.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
}

Matrix risk_adjacency(const WorldState& world, const Matrix& uncertainties,
                      const RiskParams& params) {
  const auto n = static_cast<Eigen::Index>(world.agents.size());
  if (uncertainties.rows() != n || uncertainties.cols() != n) {
    throw ValidationError("uncertainty matrix is " + std::to_string(uncertainties.rows()) + "x" +
                          std::to_string(uncertainties.cols()) + ", expected " +
                          std::to_string(n) + "x" + std::to_string(n));
  }
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      a(i, j) = assess_pair(world.agents[i], world.agents[j], uncertainties(i, j),
                            params.lambda_adj, params)
                    .weight;
    }
  }
  return a;
}

Matrix uniform_adjacency(int n) {
  Matrix a = Matrix::Ones(n, n);
  a.diagonal().setZero();
  return a;
}

Matrix node_features(const WorldState& world) {
  const auto n = static_cast<Eigen::Index>(world.agents.size());
  Matrix f = Matrix::Zero(n, kNodeFeatureDim);
  if (n == 0) return f;
  const Vec2 origin = world.agents.front().goal;
  for (Eigen::Index i = 0; i < n; ++i) {
    const AgentState& a = world.agents[i];
    const bool is_av = a.kind == AgentKind::kAv;
    const Vec2 rel = (a.position - origin) / kPositionScale;
    const Vec2 to_goal = (a.goal - a.position) / kPositionScale;
    f(i, 0) = rel.x();
    f(i, 1) = rel.y();
    f(i, 2) = std::cos(a.heading);
    f(i, 3) = std::sin(a.heading);
    f(i, 4) = a.speed / kSpeedScale;
    f(i, 5) = is_av ? a.acceleration / kAccelScale : 0.0;
    f(i, 6) = to_goal.x();
    f(i, 7) = to_goal.y();
    f(i, 8) = is_av ? 1.0 : 0.0;
  }
  return f;
}

InteractionGraph build_adjacency(const WorldState& world, const Matrix& uncertainties,
                                 const RiskParams& params) {
  InteractionGraph g;
  g.node_features = node_features(world);
  g.adjacency = risk_adjacency(world, uncertainties, params);
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

}  // namespace cogrisk
