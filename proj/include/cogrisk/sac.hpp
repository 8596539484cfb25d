#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cogrisk/env.hpp"
#include "cogrisk/neural.hpp"
#include "cogrisk/rng.hpp"

namespace cogrisk {

struct Transition {
  Observation observation;
  Vec2 unit_action = Vec2::Zero();  // policy output in [-1, 1]^2
  double reward = 0.0;
  Observation next_observation;
  bool done = false;
  Matrix uncertainties;  // u_t snapshot, N x N
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  // Oldest-first access, i in [0, size).
  const Transition& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::vector<Transition> ring_;
};

// Uniform without replacement; empty when the buffer holds fewer than batch_size.
std::vector<const Transition*> sample_minibatch(const ReplayBuffer& buffer, std::size_t batch_size,
                                                Rng& rng);

// G-SAC-Cog: risk graph + GCN. G-SAC-NoCog: uniform graph + GCN. S-SAC: flat MLP.
enum class SacVariant { kGcnRisk, kGcnUniform, kFlat };

std::string to_string(SacVariant variant);
SacVariant parse_sac_variant(const std::string& name);
GraphMode graph_mode_for(SacVariant variant);

struct SacConfig {
  SacVariant variant = SacVariant::kGcnRisk;
  nn::NetworkConfig network;
  double gamma = 0.99;
  double tau = 0.005;
  double alpha = 0.2;
  std::size_t batch_size = 256;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  std::size_t buffer_capacity = 100000;
  std::size_t warmup = 1000;
  int updates_per_step = 1;
  int episodes = 1000;
  Vec2 action_bounds{kAccelLimit, kMaxHeadingChange};
  int eval_interval = 0;  // episodes between evaluations, 0 = never
  int eval_episodes = 10;
};

void validate(const SacConfig& config);

// Network config actually used for a variant (flat variant forces the flat encoder).
nn::NetworkConfig effective_network(const SacConfig& config);
std::uint64_t network_hash(const SacConfig& config);

// y = r + (1 - done) * (gamma * min_q_next - alpha * log_prob_next)
double critic_target(double reward, bool done, double min_q_next, double log_prob_next,
                     double gamma, double alpha);

// Mean over the batch and both critics of 0.5 * (Q - y)^2.
double critic_loss(const Matrix& q1, const Matrix& q2, const Matrix& y);

// Mean over the batch of alpha * log_prob - min(Q1, Q2).
double actor_loss(const Matrix& log_prob, const Matrix& q1, const Matrix& q2, double alpha);

// Loss and parameter gradients (accumulated into g1, g2 when non-null).
double critic_loss_and_grad(const nn::Critic& c1, const nn::Critic& c2,
                            const nn::GraphBatch& batch, const Matrix& actions, const Matrix& y,
                            nn::Critic* g1, nn::Critic* g2);

// Reparameterized actor loss for fixed noise `eps`; gradients accumulate into `grad`.
double actor_loss_and_grad(const nn::Actor& actor, const nn::Critic& c1, const nn::Critic& c2,
                           const nn::GraphBatch& batch, const Matrix& eps, double alpha,
                           const Vec2& bounds, nn::Actor* grad);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

/// Actor, twin critics and their targets plus optimizer state.
class SacAgent {
 public:
  SacAgent(const SacConfig& config, std::uint64_t seed);

  nn::PolicyOutput act(const Observation& obs, Rng& rng, bool deterministic) const;
  UpdateStats update(const std::vector<const Transition*>& batch, Rng& rng);

  const SacConfig& config() const { return config_; }
  std::vector<nn::NamedTensor> tensors();

  void save(const std::filesystem::path& path);
  void load(const std::filesystem::path& path);

  nn::Actor& actor() { return actor_; }
  nn::Critic& critic(int i) { return i == 0 ? critic1_ : critic2_; }
  nn::Critic& target(int i) { return i == 0 ? target1_ : target2_; }

 private:
  void init_optimizers();

  SacConfig config_;
  nn::Actor actor_;
  nn::Critic critic1_, critic2_, target1_, target2_;
  nn::Actor actor_grad_;
  nn::Critic critic1_grad_, critic2_grad_;
  nn::AdamState actor_opt_, critic1_opt_, critic2_opt_;
};

struct TrainingRow {
  int episode = 0;
  int steps = 0;
  double episode_return = 0.0;
  Outcome outcome = Outcome::kRunning;
  double critic_loss = 0.0;  // mean over updates in the episode
  double actor_loss = 0.0;
  double alpha = 0.0;
  std::optional<double> eval_success;
  std::optional<double> eval_collision;
  std::optional<double> eval_timeout;
};

std::string training_csv_header();
std::string training_csv_row(const TrainingRow& row);

struct TrainOptions {
  std::filesystem::path dump_dir;  // NaN diagnostics land here when set
  std::function<void(const TrainingRow&)> on_episode;
};

struct TrainResult {
  SacAgent agent;
  std::vector<TrainingRow> rows;
};

// Runs the full training loop; episodes cycle through `scenarios` in a seeded order.
TrainResult train(const std::vector<Scenario>& scenarios, const SacConfig& config,
                  const EnvConfig& env_config, std::uint64_t seed, const TrainOptions& options = {});

}  // namespace cogrisk
