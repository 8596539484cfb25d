#pragma once

#include <map>
#include <optional>

#include "cogrisk/world.hpp"

namespace cogrisk {

inline constexpr double kVarianceFloor = 1e-6;

// Independent per-component Gaussian over a planar velocity.
struct GaussianBelief {
  Vec2 mean = Vec2::Zero();
  Vec2 variance = Vec2::Ones();
};

// Observed velocity with a fixed, time-invariant variance.
struct ObservationDistribution {
  Vec2 mean = Vec2::Zero();
  Vec2 variance = Vec2::Ones();
};

struct CognitionParams {
  double sigma_obs_sq = 0.04;      // (m/s)^2
  double process_noise_sq = 0.05;  // (m/s)^2 added to the prior each step
  double sigma_init_sq = 1.0;      // (m/s)^2 prior variance on first contact
};

void validate(const CognitionParams& params);

// Sum over both components of KL(p || o) for univariate Gaussians.
double kl_gaussian(const GaussianBelief& p, const ObservationDistribution& o);

// Constant-velocity prior: mean is the last observation, variance is the
// previous posterior variance inflated by the process noise.
GaussianBelief predict_velocity(const GaussianBelief& prev_posterior,
                                const Vec2& last_observed_velocity, double process_noise_sq);

// Precision-weighted fusion of prior and observation.
GaussianBelief bayes_update(const GaussianBelief& prior, const ObservationDistribution& obs);

/// One observer's beliefs about every agent it has seen.
///
/// Each call to step() runs predict, observe, score and update once per
/// observed agent. Agents seen for the first time start from a prior
/// centred on their first observation with variance sigma_init_sq.
class CognitiveTracker {
 public:
  struct Track {
    GaussianBelief posterior;
    Vec2 last_observed = Vec2::Zero();
    double last_uncertainty = 0.0;
  };

  explicit CognitiveTracker(CognitionParams params = {});

  std::map<int, double> step(const std::map<int, Vec2>& observed_velocities);

  std::optional<double> uncertainty(int id) const;
  const Track* track(int id) const;
  const std::map<int, Track>& tracks() const { return tracks_; }
  const CognitionParams& params() const { return params_; }

  bool operator==(const CognitiveTracker& other) const;

 private:
  CognitionParams params_;
  std::map<int, Track> tracks_;
};

std::map<int, double> cognitive_step(CognitiveTracker& tracker,
                                     const std::map<int, Vec2>& observed_velocities);

}  // namespace cogrisk
