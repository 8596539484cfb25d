#include "cogrisk/sac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "cogrisk/error.hpp"
#include "cogrisk/policy.hpp"

namespace cogrisk {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("replay buffer capacity must be > 0");
  ring_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw ContractError("replay buffer index out of range");
  const std::size_t start = size_ < capacity_ ? 0 : next_;
  return ring_[(start + i) % capacity_];
}

std::vector<const Transition*> sample_minibatch(const ReplayBuffer& buffer, std::size_t batch_size,
                                                Rng& rng) {
  std::vector<const Transition*> out;
  if (batch_size == 0 || buffer.size() < batch_size) return out;
  std::vector<std::size_t> idx(buffer.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> chosen;
  chosen.reserve(batch_size);
  std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), batch_size, rng);
  out.reserve(batch_size);
  for (std::size_t i : chosen) out.push_back(&buffer.at(i));
  return out;
}

std::string to_string(SacVariant variant) {
  switch (variant) {
    case SacVariant::kGcnRisk: return "gcn-risk";
    case SacVariant::kGcnUniform: return "gcn-uniform";
    case SacVariant::kFlat: return "flat";
  }
  return "?";
}

SacVariant parse_sac_variant(const std::string& name) {
  if (name == "gcn-risk") return SacVariant::kGcnRisk;
  if (name == "gcn-uniform") return SacVariant::kGcnUniform;
  if (name == "flat") return SacVariant::kFlat;
  throw ValidationError("unknown SAC variant '" + name + "' (expected gcn-risk, gcn-uniform, flat)");
}

GraphMode graph_mode_for(SacVariant variant) {
  return variant == SacVariant::kGcnRisk ? GraphMode::kRisk : GraphMode::kUniform;
}

void validate(const SacConfig& c) {
  auto fail = [](const std::string& m) { throw ValidationError("sac." + m); };
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) fail("gamma must be in [0, 1)");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) fail("tau must be in (0, 1]");
  if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) fail("alpha must be >= 0");
  if (c.batch_size == 0) fail("batch_size must be > 0");
  if (!(c.actor_lr > 0.0) || !(c.critic_lr > 0.0)) fail("learning rates must be > 0");
  if (c.buffer_capacity < c.batch_size) fail("buffer_capacity must be >= batch_size");
  if (c.updates_per_step < 0) fail("updates_per_step must be >= 0");
  if (c.episodes < 0) fail("episodes must be >= 0");
  if (!(c.action_bounds.x() > 0.0 && c.action_bounds.y() > 0.0)) fail("action bounds must be > 0");
  if (c.eval_interval < 0) fail("eval_interval must be >= 0");
  if (c.eval_episodes <= 0) fail("eval_episodes must be > 0");
  const nn::NetworkConfig& n = c.network;
  if (n.gcn_hidden <= 0 || n.mlp_hidden <= 0) fail("network hidden sizes must be > 0");
  if (n.max_agents <= 0) fail("network.max_agents must be > 0");
  if (!(n.log_std_min < n.log_std_max)) fail("network log_std range is empty");
}

nn::NetworkConfig effective_network(const SacConfig& config) {
  nn::NetworkConfig n = config.network;
  n.encoder = config.variant == SacVariant::kFlat ? nn::EncoderKind::kFlat : nn::EncoderKind::kGcn;
  return n;
}

std::uint64_t network_hash(const SacConfig& config) {
  const nn::NetworkConfig n = effective_network(config);
  std::ostringstream os;
  os << to_string(config.variant) << '|' << nn::to_string(n.encoder) << '|' << n.gcn_hidden << '|'
     << n.mlp_hidden << '|' << n.max_agents << '|' << std::hexfloat << n.log_std_min << '|'
     << n.log_std_max;
  return hash_tag(os.str());
}

double critic_target(double reward, bool done, double min_q_next, double log_prob_next,
                     double gamma, double alpha) {
  return reward + (done ? 0.0 : 1.0) * (gamma * min_q_next - alpha * log_prob_next);
}

double critic_loss(const Matrix& q1, const Matrix& q2, const Matrix& y) {
  const double n = static_cast<double>(y.rows());
  return 0.5 * ((q1 - y).squaredNorm() + (q2 - y).squaredNorm()) / (2.0 * n);
}

double actor_loss(const Matrix& log_prob, const Matrix& q1, const Matrix& q2, double alpha) {
  const Matrix minq = q1.cwiseMin(q2);
  return (alpha * log_prob - minq).mean();
}

double critic_loss_and_grad(const nn::Critic& c1, const nn::Critic& c2,
                            const nn::GraphBatch& batch, const Matrix& actions, const Matrix& y,
                            nn::Critic* g1, nn::Critic* g2) {
  nn::CriticCache k1, k2;
  const Matrix q1 = c1.forward(batch, actions, &k1);
  const Matrix q2 = c2.forward(batch, actions, &k2);
  const double scale = 1.0 / (2.0 * static_cast<double>(y.rows()));
  if (g1) c1.backward(k1, (q1 - y) * scale, g1);
  if (g2) c2.backward(k2, (q2 - y) * scale, g2);
  return critic_loss(q1, q2, y);
}

double actor_loss_and_grad(const nn::Actor& actor, const nn::Critic& c1, const nn::Critic& c2,
                           const nn::GraphBatch& batch, const Matrix& eps, double alpha,
                           const Vec2& bounds, nn::Actor* grad) {
  nn::ActorCache ac;
  actor.forward(batch, ac);
  const nn::SquashedBatch sq = nn::squash(ac.mean, ac.log_std, eps, bounds);
  nn::CriticCache k1, k2;
  const Matrix q1 = c1.forward(batch, sq.unit_action, &k1);
  const Matrix q2 = c2.forward(batch, sq.unit_action, &k2);
  const double loss = actor_loss(sq.log_prob, q1, q2, alpha);
  if (grad) {
    const Eigen::Index n = q1.rows();
    const double inv = 1.0 / static_cast<double>(n);
    Matrix dq1 = Matrix::Zero(n, 1), dq2 = Matrix::Zero(n, 1);
    for (Eigen::Index b = 0; b < n; ++b) {
      if (q1(b, 0) <= q2(b, 0)) {
        dq1(b, 0) = -inv;
      } else {
        dq2(b, 0) = -inv;
      }
    }
    const Matrix d_unit = c1.backward(k1, dq1, nullptr) + c2.backward(k2, dq2, nullptr);
    const Matrix d_logp = Matrix::Constant(n, 1, alpha * inv);
    Matrix d_mean, d_log_std;
    nn::squash_backward(ac.log_std, sq, d_unit, d_logp, d_mean, d_log_std);
    actor.backward(ac, d_mean, d_log_std, grad);
  }
  return loss;
}

namespace {

nn::Actor make_actor(const SacConfig& c, Rng& rng) { return nn::Actor(effective_network(c), rng); }
nn::Critic make_critic(const SacConfig& c, Rng& rng) {
  return nn::Critic(effective_network(c), rng);
}

Rng seeded(std::uint64_t seed, const char* tag) { return make_rng(seed, tag); }

nn::GraphBatch batch_of(const std::vector<const Transition*>& batch, bool next) {
  std::vector<nn::GraphSample> samples;
  samples.reserve(batch.size());
  for (const Transition* t : batch) {
    samples.push_back(next ? t->next_observation.sample() : t->observation.sample());
  }
  return nn::make_graph_batch(samples);
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

}  // namespace

SacAgent::SacAgent(const SacConfig& config, std::uint64_t seed) : config_(config) {
  validate(config_);
  Rng actor_rng = seeded(seed, "actor-init");
  Rng c1_rng = seeded(seed, "critic1-init");
  Rng c2_rng = seeded(seed, "critic2-init");
  actor_ = make_actor(config_, actor_rng);
  critic1_ = make_critic(config_, c1_rng);
  critic2_ = make_critic(config_, c2_rng);
  target1_ = critic1_;
  target2_ = critic2_;
  actor_grad_ = actor_;
  critic1_grad_ = critic1_;
  critic2_grad_ = critic2_;
  init_optimizers();
}

void SacAgent::init_optimizers() {
  actor_opt_ = nn::make_adam_state(nn::values(actor_.tensors()));
  critic1_opt_ = nn::make_adam_state(nn::values(critic1_.tensors()));
  critic2_opt_ = nn::make_adam_state(nn::values(critic2_.tensors()));
}

nn::PolicyOutput SacAgent::act(const Observation& obs, Rng& rng, bool deterministic) const {
  const nn::GraphSample sample = obs.sample();
  const nn::GraphBatch batch = nn::make_graph_batch(std::span<const nn::GraphSample>(&sample, 1));
  nn::ActorCache cache;
  actor_.forward(batch, cache);
  const Vec2 mean(cache.mean(0, 0), cache.mean(0, 1));
  const Vec2 log_std(cache.log_std(0, 0), cache.log_std(0, 1));
  return nn::policy_sample(mean, log_std, rng, config_.action_bounds, deterministic);
}

UpdateStats SacAgent::update(const std::vector<const Transition*>& batch, Rng& rng) {
  if (batch.empty()) throw ContractError("update needs a non-empty minibatch");
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  const nn::GraphBatch now = batch_of(batch, false);
  const nn::GraphBatch next = batch_of(batch, true);

  Matrix actions(n, 2);
  for (Eigen::Index b = 0; b < n; ++b) {
    actions(b, 0) = batch[b]->unit_action.x();
    actions(b, 1) = batch[b]->unit_action.y();
  }

  // Bootstrapped targets from the target critics and a fresh next-state action.
  nn::ActorCache next_cache;
  actor_.forward(next, next_cache);
  const nn::SquashedBatch next_sq =
      nn::squash(next_cache.mean, next_cache.log_std, standard_normal(n, 2, rng),
                 config_.action_bounds);
  const Matrix q1n = target1_.forward(next, next_sq.unit_action, nullptr);
  const Matrix q2n = target2_.forward(next, next_sq.unit_action, nullptr);
  Matrix y(n, 1);
  for (Eigen::Index b = 0; b < n; ++b) {
    y(b, 0) = critic_target(batch[b]->reward, batch[b]->done, std::min(q1n(b, 0), q2n(b, 0)),
                            next_sq.log_prob(b, 0), config_.gamma, config_.alpha);
  }

  UpdateStats stats;
  const auto g1 = critic1_grad_.tensors();
  const auto g2 = critic2_grad_.tensors();
  nn::zero(g1);
  nn::zero(g2);
  stats.critic_loss =
      critic_loss_and_grad(critic1_, critic2_, now, actions, y, &critic1_grad_, &critic2_grad_);
  nn::optimizer_step(nn::values(critic1_.tensors()), nn::values(g1), critic1_opt_,
                     {config_.critic_lr});
  nn::optimizer_step(nn::values(critic2_.tensors()), nn::values(g2), critic2_opt_,
                     {config_.critic_lr});

  const auto ga = actor_grad_.tensors();
  nn::zero(ga);
  stats.actor_loss = actor_loss_and_grad(actor_, critic1_, critic2_, now, standard_normal(n, 2, rng),
                                         config_.alpha, config_.action_bounds, &actor_grad_);
  nn::optimizer_step(nn::values(actor_.tensors()), nn::values(ga), actor_opt_, {config_.actor_lr});

  nn::soft_update(nn::values(target1_.tensors()), nn::values(critic1_.tensors()), config_.tau);
  nn::soft_update(nn::values(target2_.tensors()), nn::values(critic2_.tensors()), config_.tau);
  return stats;
}

std::vector<nn::NamedTensor> SacAgent::tensors() {
  std::vector<nn::NamedTensor> all = actor_.tensors("actor");
  for (auto* part : {&critic1_, &critic2_, &target1_, &target2_}) {
    const std::string prefix = part == &critic1_   ? "critic1"
                               : part == &critic2_ ? "critic2"
                               : part == &target1_ ? "target1"
                                                   : "target2";
    auto t = part->tensors(prefix);
    all.insert(all.end(), t.begin(), t.end());
  }
  return all;
}

void SacAgent::save(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  nn::write_tensors(os, network_hash(config_), tensors());
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

void SacAgent::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open checkpoint " + path.string());
  nn::read_tensors(is, network_hash(config_), tensors());
  init_optimizers();
}

std::string training_csv_header() {
  return "episode,steps,return,outcome,critic_loss,actor_loss,alpha,eval_success,eval_collision,"
         "eval_timeout";
}

std::string training_csv_row(const TrainingRow& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << r.episode << ',' << r.steps << ',' << r.episode_return << ',' << to_string(r.outcome)
     << ',' << r.critic_loss << ',' << r.actor_loss << ',' << r.alpha;
  for (const auto& v : {r.eval_success, r.eval_collision, r.eval_timeout}) {
    os << ',';
    if (v) os << *v;
  }
  return os.str();
}

namespace {

void dump_nan(const std::filesystem::path& dir, SacAgent& agent, const TrainingRow& row,
              int update_index, const UpdateStats& stats) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream info(dir / "nan_report.txt");
  info << "episode " << row.episode << "\nstep " << row.steps << "\nupdate " << update_index
       << "\ncritic_loss " << stats.critic_loss << "\nactor_loss " << stats.actor_loss << '\n';
  std::ofstream ckpt(dir / "nan_checkpoint.txt");
  nn::write_tensors(ckpt, network_hash(agent.config()), agent.tensors());
}

}  // namespace

TrainResult train(const std::vector<Scenario>& scenarios, const SacConfig& config,
                  const EnvConfig& env_config, std::uint64_t seed, const TrainOptions& options) {
  validate(config);
  if (scenarios.empty()) throw ValidationError("training needs at least one scenario");
  for (const Scenario& s : scenarios) validate(s);

  EnvConfig env_cfg = env_config;
  env_cfg.graph_mode = graph_mode_for(config.variant);
  Environment env(env_cfg);

  TrainResult result{SacAgent(config, substream_seed(seed, "agent", 0)), {}};
  SacAgent& agent = result.agent;
  ReplayBuffer buffer(config.buffer_capacity);
  Rng act_rng = make_rng(seed, "act");
  Rng sample_rng = make_rng(seed, "minibatch");
  Rng update_rng = make_rng(seed, "update");
  Rng order_rng = make_rng(seed, "order");

  std::vector<std::size_t> order(scenarios.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t learn_after = std::max(config.warmup, config.batch_size);
  int total_updates = 0;

  for (int ep = 0; ep < config.episodes; ++ep) {
    const std::size_t slot = static_cast<std::size_t>(ep) % order.size();
    if (slot == 0) std::shuffle(order.begin(), order.end(), order_rng);
    const Scenario& scenario = scenarios[order[slot]];

    TrainingRow row;
    row.episode = ep;
    row.alpha = config.alpha;
    Observation obs = env.reset(scenario, substream_seed(seed, "episode", ep));
    int updates = 0;
    double critic_sum = 0.0, actor_sum = 0.0;
    while (!env.done()) {
      const nn::PolicyOutput out = agent.act(obs, act_rng, false);
      Matrix u_snapshot = env.uncertainties();
      StepResult r = env.step({out.action.x(), out.action.y()});
      row.steps += 1;
      row.episode_return += r.reward;
      // Timeouts truncate rather than terminate, so they still bootstrap.
      const bool terminal = r.outcome == Outcome::kSuccess || r.outcome == Outcome::kCollision;
      buffer.push({std::move(obs), out.unit_action, r.reward, r.observation, terminal,
                   std::move(u_snapshot)});
      obs = std::move(r.observation);

      if (buffer.size() >= learn_after) {
        for (int k = 0; k < config.updates_per_step; ++k) {
          const auto batch = sample_minibatch(buffer, config.batch_size, sample_rng);
          const UpdateStats stats = agent.update(batch, update_rng);
          ++total_updates;
          if (!std::isfinite(stats.critic_loss) || !std::isfinite(stats.actor_loss)) {
            dump_nan(options.dump_dir, agent, row, total_updates, stats);
            throw std::runtime_error("non-finite loss at episode " + std::to_string(ep) +
                                     ", update " + std::to_string(total_updates));
          }
          critic_sum += stats.critic_loss;
          actor_sum += stats.actor_loss;
          ++updates;
        }
      }
    }
    row.outcome = env.outcome();
    if (updates > 0) {
      row.critic_loss = critic_sum / updates;
      row.actor_loss = actor_sum / updates;
    }

    if (config.eval_interval > 0 && (ep + 1) % config.eval_interval == 0) {
      SacPolicy policy(agent, true);
      EnvConfig eval_cfg = env_cfg;
      const auto logs = evaluate(scenarios, policy, eval_cfg, config.eval_episodes,
                                 substream_seed(seed, "periodic-eval", ep));
      double s = 0, c = 0, t = 0;
      for (const EpisodeLog& l : logs) {
        s += l.outcome == Outcome::kSuccess;
        c += l.outcome == Outcome::kCollision;
        t += l.outcome == Outcome::kTimeout;
      }
      const double n = static_cast<double>(logs.size());
      row.eval_success = s / n;
      row.eval_collision = c / n;
      row.eval_timeout = t / n;
    }
    result.rows.push_back(row);
    if (options.on_episode) options.on_episode(row);
  }
  return result;
}

}  // namespace cogrisk
