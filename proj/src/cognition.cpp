#include "cogrisk/cognition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cogrisk/error.hpp"

namespace cogrisk {
namespace {

void require_positive_variance(const Vec2& variance, const char* who) {
  for (int k = 0; k < 2; ++k) {
    if (!(variance[k] > 0.0) || !std::isfinite(variance[k])) {
      throw ValidationError(std::string(who) + ": variance must be positive and finite");
    }
  }
}

Vec2 floored(const Vec2& variance) {
  return variance.cwiseMax(kVarianceFloor);
}

}  // namespace

void validate(const CognitionParams& params) {
  if (!(params.sigma_obs_sq > 0.0)) throw ValidationError("sigma_obs_sq must be > 0");
  if (!(params.process_noise_sq >= 0.0)) throw ValidationError("process_noise_sq must be >= 0");
  if (!(params.sigma_init_sq > 0.0)) throw ValidationError("sigma_init_sq must be > 0");
}

double kl_gaussian(const GaussianBelief& p, const ObservationDistribution& o) {
  require_positive_variance(p.variance, "kl_gaussian prior");
  require_positive_variance(o.variance, "kl_gaussian observation");
  double kl = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double vp = p.variance[k];
    const double vo = o.variance[k];
    const double gap = p.mean[k] - o.mean[k];
    kl += 0.5 * std::log(vo / vp) + (vp + gap * gap) / (2.0 * vo) - 0.5;
  }
  // Cancellation can leave a tiny negative residue when p == o.
  return std::max(kl, 0.0);
}

GaussianBelief predict_velocity(const GaussianBelief& prev_posterior,
                                const Vec2& last_observed_velocity, double process_noise_sq) {
  GaussianBelief prior;
  prior.mean = last_observed_velocity;
  prior.variance = floored(prev_posterior.variance.array() + process_noise_sq);
  return prior;
}

GaussianBelief bayes_update(const GaussianBelief& prior, const ObservationDistribution& obs) {
  require_positive_variance(prior.variance, "bayes_update prior");
  require_positive_variance(obs.variance, "bayes_update observation");
  GaussianBelief post;
  for (int k = 0; k < 2; ++k) {
    const double precision = 1.0 / prior.variance[k] + 1.0 / obs.variance[k];
    post.variance[k] = 1.0 / precision;
    post.mean[k] =
        post.variance[k] * (prior.mean[k] / prior.variance[k] + obs.mean[k] / obs.variance[k]);
  }
  post.variance = floored(post.variance);
  return post;
}

CognitiveTracker::CognitiveTracker(CognitionParams params) : params_(params) { validate(params_); }

std::map<int, double> CognitiveTracker::step(const std::map<int, Vec2>& observed_velocities) {
  std::map<int, double> out;
  for (const auto& [id, velocity] : observed_velocities) {
    if (!std::isfinite(velocity.x()) || !std::isfinite(velocity.y())) {
      throw ValidationError("non-finite observed velocity for agent " + std::to_string(id));
    }
    ObservationDistribution obs{velocity, Vec2::Constant(params_.sigma_obs_sq)};
    auto it = tracks_.find(id);
    GaussianBelief prior;
    if (it == tracks_.end()) {
      prior.mean = velocity;
      prior.variance = Vec2::Constant(params_.sigma_init_sq);
      it = tracks_.emplace(id, Track{}).first;
    } else {
      prior = predict_velocity(it->second.posterior, it->second.last_observed,
                               params_.process_noise_sq);
    }
    const double u = kl_gaussian(prior, obs);
    it->second.posterior = bayes_update(prior, obs);
    it->second.last_observed = velocity;
    it->second.last_uncertainty = u;
    out.emplace(id, u);
  }
  return out;
}

std::optional<double> CognitiveTracker::uncertainty(int id) const {
  const auto it = tracks_.find(id);
  if (it == tracks_.end()) return std::nullopt;
  return it->second.last_uncertainty;
}

const CognitiveTracker::Track* CognitiveTracker::track(int id) const {
  const auto it = tracks_.find(id);
  return it == tracks_.end() ? nullptr : &it->second;
}

bool CognitiveTracker::operator==(const CognitiveTracker& other) const {
  if (tracks_.size() != other.tracks_.size()) return false;
  for (const auto& [id, t] : tracks_) {
    const auto it = other.tracks_.find(id);
    if (it == other.tracks_.end()) return false;
    const Track& o = it->second;
    if (t.posterior.mean != o.posterior.mean || t.posterior.variance != o.posterior.variance ||
        t.last_observed != o.last_observed || t.last_uncertainty != o.last_uncertainty) {
      return false;
    }
  }
  return params_.sigma_obs_sq == other.params_.sigma_obs_sq &&
         params_.process_noise_sq == other.params_.process_noise_sq &&
         params_.sigma_init_sq == other.params_.sigma_init_sq;
}

std::map<int, double> cognitive_step(CognitiveTracker& tracker,
                                     const std::map<int, Vec2>& observed_velocities) {
  return tracker.step(observed_velocities);
}

}  // namespace cogrisk
