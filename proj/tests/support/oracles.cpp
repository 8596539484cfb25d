#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cogrisk/sac.hpp"

namespace cogrisk::testing {

Matrix Gen::matrix(Eigen::Index rows, Eigen::Index cols, double half) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(-half, half);
  return m;
}

AgentState Gen::agent(int id, AgentKind kind) {
  const double vmax = kind == AgentKind::kAv ? kAvMaxSpeed : kPedestrianMaxSpeed;
  AgentState a = make_agent(id, kind, point(15.0), uniform(-std::numbers::pi, std::numbers::pi),
                            uniform(0.0, vmax), point(20.0));
  a.acceleration = kind == AgentKind::kAv ? uniform(-kAccelLimit, kAccelLimit) : uniform(0.0, 2.0);
  return a;
}

WorldState Gen::world(int pedestrians) {
  WorldState w;
  w.agents.push_back(agent(0, AgentKind::kAv));
  for (int i = 1; i <= pedestrians; ++i) w.agents.push_back(agent(i, AgentKind::kPedestrian));
  return w;
}

EpisodeLog Gen::episode_log(int agents, int steps) {
  EpisodeLog log;
  log.scenario_id = "random";
  log.dt = kDefaultDt;
  log.pedestrian_model = "cr-sfm";
  for (int i = 0; i < agents; ++i) {
    AgentMeta m;
    m.id = i;
    m.kind = i == 0 ? AgentKind::kAv : AgentKind::kPedestrian;
    m.radius = default_radius(m.kind);
    log.agents.push_back(m);
  }
  for (int t = 0; t < steps; ++t) {
    StepRecord s;
    s.step = t;
    s.time = t * log.dt;
    for (int i = 0; i < agents; ++i) {
      AgentRecord r;
      r.id = i;
      r.position = point(30.0);
      r.velocity = point(2.0);
      r.speed = uniform(0.0, i == 0 ? 6.0 : 2.0);
      r.heading = uniform(-3.0, 3.0);
      r.accel = i == 0 ? uniform(-2.0, 2.0) : uniform(0.0, 2.0);
      s.agents.push_back(r);
    }
    log.steps.push_back(s);
  }
  log.outcome = std::array{Outcome::kSuccess, Outcome::kCollision, Outcome::kTimeout}[integer(0, 2)];
  return log;
}

namespace {

double log_density(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - (x - mean) * (x - mean) / (2.0 * var);
}

double kl_1d(double mp, double vp, double mo, double vo, int intervals) {
  const double half = 16.0 * std::sqrt(vp);
  const double a = mp - half;
  const double h = 2.0 * half / intervals;
  auto f = [&](double x) {
    const double lp = log_density(x, mp, vp);
    return std::exp(lp) * (lp - log_density(x, mo, vo));
  };
  double sum = f(a) + f(a + intervals * h);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

}  // namespace

double kl_quadrature(const Vec2& mean_p, const Vec2& var_p, const Vec2& mean_o, const Vec2& var_o,
                     int intervals) {
  return kl_1d(mean_p.x(), var_p.x(), mean_o.x(), var_o.x(), intervals) +
         kl_1d(mean_p.y(), var_p.y(), mean_o.y(), var_o.y(), intervals);
}

Matrix dense_normalized(const Matrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  std::vector<double> degree(n, 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) degree[i] += adjacency(i, j) + (i == j ? 1.0 : 0.0);
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = (adjacency(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt(degree[i] * degree[j]);
  return out;
}

Matrix dense_gcn(const Matrix& norm, const Matrix& h, const Matrix& w, const Matrix& b, bool relu) {
  const Eigen::Index n = h.rows(), in = h.cols(), out = w.cols();
  Matrix hw = Matrix::Zero(n, out);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < out; ++k)
      for (Eigen::Index j = 0; j < in; ++j) hw(i, k) += h(i, j) * w(j, k);
  Matrix y(n, out);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < out; ++k) {
      double s = b(0, k);
      for (Eigen::Index j = 0; j < n; ++j) s += norm(i, j) * hw(j, k);
      y(i, k) = relu ? std::max(s, 0.0) : s;
    }
  return y;
}

double brute_pair_weight(const AgentState& ego, const AgentState& other, double u, double lambda,
                         double gamma1, double gamma2) {
  const double dx = ego.position.x() - other.position.x();
  const double dy = ego.position.y() - other.position.y();
  const double d = std::hypot(dx, dy);
  const double nx = dx / d, ny = dy / d;
  const double closing = nx * (ego.velocity.x() - other.velocity.x()) +
                         ny * (ego.velocity.y() - other.velocity.y());
  const double k = closing >= 0.0 ? 1.0 : -1.0;
  const double s = std::hypot(other.velocity.x(), other.velocity.y());
  const double cos_phi = s > 0.0 ? (other.velocity.x() * nx + other.velocity.y() * ny) / s : 1.0;
  const double motion = s * std::abs(cos_phi) + std::abs(other.acceleration);
  const double dv = d * (1.0 + std::tanh(gamma1 * k * motion));
  return (1.0 + lambda * u) / (1.0 + gamma2 * dv);
}

Matrix brute_risk_adjacency(const WorldState& world, const Matrix& u, double lambda,
                            double gamma1, double gamma2) {
  const auto n = static_cast<Eigen::Index>(world.agents.size());
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j)
        a(i, j) = brute_pair_weight(world.agents[i], world.agents[j], u(i, j), lambda, gamma1,
                                    gamma2);
  return a;
}

namespace {

const AgentRecord& record_of(const StepRecord& s, int id) {
  for (const AgentRecord& r : s.agents)
    if (r.id == id) return r;
  throw std::runtime_error("agent missing from step");
}

}  // namespace

double naive_ade(const EpisodeLog& simulated, const EpisodeLog& truth, int id) {
  const std::size_t n = std::min(simulated.steps.size(), truth.steps.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const AgentRecord& a = record_of(simulated.steps[t], id);
    const AgentRecord& b = record_of(truth.steps[t], id);
    sum += std::hypot(a.position.x() - b.position.x(), a.position.y() - b.position.y());
  }
  return sum / static_cast<double>(n);
}

double naive_fde(const EpisodeLog& simulated, const EpisodeLog& truth, int id) {
  const std::size_t n = std::min(simulated.steps.size(), truth.steps.size());
  const AgentRecord& a = record_of(simulated.steps[n - 1], id);
  const AgentRecord& b = record_of(truth.steps.back(), id);
  return std::hypot(a.position.x() - b.position.x(), a.position.y() - b.position.y());
}

MetricsReport naive_av_report(const std::vector<EpisodeLog>& logs) {
  MetricsReport r;
  double speeds = 0.0, jerks = 0.0, peaks = 0.0;
  long speed_n = 0, jerk_n = 0;
  int s = 0, c = 0, t = 0;
  for (const EpisodeLog& log : logs) {
    ++r.episodes;
    s += log.outcome == Outcome::kSuccess;
    c += log.outcome == Outcome::kCollision;
    t += log.outcome == Outcome::kTimeout;
    double peak = 0.0;
    for (std::size_t k = 0; k < log.steps.size(); ++k) {
      const AgentRecord& av = record_of(log.steps[k], 0);
      speeds += av.speed;
      ++speed_n;
      peak = std::max(peak, std::abs(av.accel));
      if (k > 0) {
        jerks += std::abs(av.accel - record_of(log.steps[k - 1], 0).accel) / log.dt;
        ++jerk_n;
      }
    }
    peaks += peak;
  }
  r.success_rate = static_cast<double>(s) / r.episodes;
  r.collision_rate = static_cast<double>(c) / r.episodes;
  r.timeout_rate = static_cast<double>(t) / r.episodes;
  r.avg_speed = speeds / speed_n;
  r.avg_jerk = jerks / jerk_n;
  r.avg_max_abs_accel = peaks / r.episodes;
  return r;
}

GradientCheck check_gradients(const std::function<double()>& loss,
                              const std::vector<nn::NamedTensor>& params,
                              const std::vector<Matrix*>& analytic, double h, double floor) {
  GradientCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& m = *params[p].value;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = loss();
      m.data()[i] = saved - h;
      const double down = loss();
      m.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p]->data()[i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.checked;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = params[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

nn::GraphBatch random_graph_batch(Gen& gen, int batch, int max_nodes) {
  std::vector<Matrix> features, norms;
  std::vector<nn::GraphSample> samples;
  features.reserve(batch);
  norms.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    const int n = gen.integer(1, max_nodes);
    features.push_back(gen.matrix(n, kNodeFeatureDim));
    Matrix a = gen.matrix(n, n).cwiseAbs();
    a.diagonal().setZero();
    norms.push_back(normalize_adjacency(a));
  }
  for (int b = 0; b < batch; ++b)
    samples.push_back({&features[b], &norms[b], Vec2(gen.uniform(0, 1), gen.uniform(-1, 1))});
  return nn::make_graph_batch(samples);
}

SacGradientReport sac_gradient_check(std::uint64_t seed, nn::EncoderKind encoder) {
  nn::NetworkConfig cfg;
  cfg.encoder = encoder;
  cfg.gcn_hidden = 8;
  cfg.mlp_hidden = 8;
  Gen gen(seed);
  Rng rng(seed);
  nn::Critic c1(cfg, rng), c2(cfg, rng);
  nn::Actor actor(cfg, rng);
  const nn::GraphBatch batch = random_graph_batch(gen, 6, cfg.max_agents);
  const Matrix actions = gen.matrix(6, 2, 0.9);
  const Matrix y = gen.matrix(6, 1, 2.0);
  const Matrix eps = gen.matrix(6, 2, 2.0);
  const Vec2 bounds(kAccelLimit, kMaxHeadingChange);
  const double alpha = 0.2;

  SacGradientReport out;
  nn::Critic g1 = c1, g2 = c2;
  nn::zero(g1.tensors());
  nn::zero(g2.tensors());
  critic_loss_and_grad(c1, c2, batch, actions, y, &g1, &g2);
  auto critic = [&] { return critic_loss_and_grad(c1, c2, batch, actions, y, nullptr, nullptr); };
  out.critic1 = check_gradients(critic, c1.tensors(), nn::values(g1.tensors()));
  out.critic2 = check_gradients(critic, c2.tensors(), nn::values(g2.tensors()));

  nn::Actor ga = actor;
  nn::zero(ga.tensors());
  actor_loss_and_grad(actor, c1, c2, batch, eps, alpha, bounds, &ga);
  auto loss = [&] { return actor_loss_and_grad(actor, c1, c2, batch, eps, alpha, bounds, nullptr); };
  out.actor = check_gradients(loss, actor.tensors(), nn::values(ga.tensors()));
  return out;
}

}  // namespace cogrisk::testing
