#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "cogrisk/error.hpp"
#include "cogrisk/sac.hpp"
#include "cogrisk/scenarios.hpp"
#include "oracles.hpp"

using namespace cogrisk;
using doctest::Approx;

namespace {

Transition tagged(double reward) {
  Transition t;
  t.reward = reward;
  return t;
}

nn::NetworkConfig tiny() {
  nn::NetworkConfig cfg;
  cfg.gcn_hidden = 8;
  cfg.mlp_hidden = 8;
  return cfg;
}

Matrix* find(const std::vector<nn::NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  FAIL("no tensor " << name);
  return nullptr;
}

}  // namespace

TEST_SUITE("sac") {

TEST_CASE("critic target") {
  CHECK(critic_target(-20.0, true, 5.0, -1.0, 0.99, 0.2) == -20.0);
  CHECK(critic_target(1.0, false, 2.0, -1.0, 0.99, 0.2) == Approx(3.18).epsilon(1e-12));
  CHECK(critic_target(1.0, false, 2.0, -1.0, 0.99, 0.0) == Approx(1.0 + 0.99 * 2.0).epsilon(1e-12));
}

TEST_CASE("critic and actor losses") {
  const Matrix y = (Matrix(2, 1) << 1.0, -2.0).finished();
  CHECK(critic_loss(y, y, y) == 0.0);
  const Matrix zero = Matrix::Zero(1, 1), two = Matrix::Constant(1, 1, 2.0);
  CHECK(critic_loss(zero, zero, two) == Approx(2.0));
  testing::Gen gen(73);
  for (int i = 0; i < 100; ++i) {
    CHECK(critic_loss(gen.matrix(5, 1), gen.matrix(5, 1), gen.matrix(5, 1)) >= 0.0);
  }
  const Matrix logp = (Matrix(2, 1) << -1.0, 0.5).finished();
  const Matrix q1 = (Matrix(2, 1) << 3.0, 1.0).finished();
  const Matrix q2 = (Matrix(2, 1) << 2.0, 4.0).finished();
  CHECK(actor_loss(logp, q1, q2, 0.0) == Approx(-1.5));
  CHECK(actor_loss(logp, q1, q2, 0.2) == Approx(0.5 * (0.2 * -0.5) - 1.5));
}

TEST_CASE("replay buffer is a ring") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(tagged(i));
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).reward == 2.0);
  CHECK(buf.at(2).reward == 4.0);
  CHECK_THROWS_AS(buf.at(3), ContractError);
  CHECK_THROWS_AS(ReplayBuffer(0), ValidationError);
}

TEST_CASE("minibatch sampling") {
  ReplayBuffer buf(10);
  Rng rng(79);
  for (int i = 0; i < 4; ++i) buf.push(tagged(i));
  CHECK(sample_minibatch(buf, 5, rng).empty());
  const auto all = sample_minibatch(buf, 4, rng);
  std::set<double> seen;
  for (const auto* t : all) seen.insert(t->reward);
  CHECK(seen.size() == 4);
  for (int i = 4; i < 10; ++i) buf.push(tagged(i));
  const auto some = sample_minibatch(buf, 6, rng);
  std::set<const Transition*> distinct(some.begin(), some.end());
  CHECK(distinct.size() == 6);
}

TEST_CASE("analytic gradients match finite differences") {
  for (auto kind : {nn::EncoderKind::kGcn, nn::EncoderKind::kFlat}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto r = testing::sac_gradient_check(seed, kind);
      CHECK_MESSAGE(r.critic1.max_relative_error < 1e-4, r.critic1.worst);
      CHECK_MESSAGE(r.critic2.max_relative_error < 1e-4, r.critic2.worst);
      CHECK_MESSAGE(r.actor.max_relative_error < 1e-4, r.actor.worst);
      CHECK(r.actor.checked > 100);
    }
  }
}

TEST_CASE("actor gradient flows through the smaller critic only") {
  Rng rng(83);
  testing::Gen gen(83);
  nn::Critic c1(tiny(), rng);
  nn::Actor actor(tiny(), rng);
  nn::Critic high = c1;
  (*find(high.tensors(), "critic.out.bias"))(0, 0) += 100.0;
  const nn::GraphBatch batch = testing::random_graph_batch(gen, 5, 3);
  const Matrix eps = gen.matrix(5, 2);
  const Vec2 bounds(2.0, 0.2);
  auto grad_with = [&](const nn::Critic& a, const nn::Critic& b) {
    nn::Actor g = actor;
    nn::zero(g.tensors());
    actor_loss_and_grad(actor, a, b, batch, eps, 0.2, bounds, &g);
    std::vector<Matrix> out;
    for (Matrix* m : nn::values(g.tensors())) out.push_back(*m);
    return out;
  };
  const auto ref = grad_with(c1, c1);
  const auto ab = grad_with(c1, high), ba = grad_with(high, c1);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(ab[i] == ref[i]);
    CHECK(ba[i] == ref[i]);
  }
}

TEST_CASE("constant critic drives the actor toward higher entropy") {
  Rng rng(89);
  testing::Gen gen(89);
  nn::Critic flat_q(tiny(), rng);
  nn::zero(flat_q.tensors());
  (*find(flat_q.tensors(), "critic.out.bias"))(0, 0) = 3.0;
  nn::Actor actor(tiny(), rng);
  find(actor.tensors(), "actor.log_std.weight")->setZero();
  find(actor.tensors(), "actor.log_std.bias")->setConstant(-3.0);
  const nn::GraphBatch batch = testing::random_graph_batch(gen, 16, 3);
  const Vec2 bounds(2.0, 0.2);
  nn::Actor grad = actor;
  nn::AdamState opt = nn::make_adam_state(nn::values(actor.tensors()));
  auto entropy = [&] {
    Rng r(7);
    std::normal_distribution<double> n;
    Matrix eps(16, 2);
    double sum = 0.0;
    for (int k = 0; k < 50; ++k) {
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = n(r);
      sum += actor_loss_and_grad(actor, flat_q, flat_q, batch, eps, 1.0, bounds, nullptr) + 3.0;
    }
    return -sum / 50.0;
  };
  const double before = entropy();
  std::normal_distribution<double> normal;
  for (int step = 0; step < 200; ++step) {
    Matrix eps(16, 2);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
    nn::zero(grad.tensors());
    actor_loss_and_grad(actor, flat_q, flat_q, batch, eps, 0.2, bounds, &grad);
    nn::optimizer_step(nn::values(actor.tensors()), nn::values(grad.tensors()), opt, {0.01});
  }
  const double after = entropy();
  CHECK(after > before + 1.0);
  // No distribution on the action box has more entropy than the uniform one.
  CHECK(after < std::log(2.0 * bounds.x()) + std::log(2.0 * bounds.y()));
  nn::ActorCache cache;
  actor.forward(batch, cache);
  CHECK(cache.log_std.mean() > -1.5);
}

TEST_CASE("variant names and validation") {
  for (auto v : {SacVariant::kGcnRisk, SacVariant::kGcnUniform, SacVariant::kFlat})
    CHECK(parse_sac_variant(to_string(v)) == v);
  CHECK(graph_mode_for(SacVariant::kGcnUniform) == GraphMode::kUniform);
  SacConfig c;
  c.variant = SacVariant::kFlat;
  CHECK(effective_network(c).encoder == nn::EncoderKind::kFlat);
  c.gamma = 1.5;
  CHECK_THROWS_AS(validate(c), ValidationError);
  CHECK_THROWS_AS(parse_sac_variant("ppo"), ValidationError);
}

TEST_CASE("agent checkpoint round trip") {
  SacConfig c;
  c.network = tiny();
  SacAgent a(c, 1), b(c, 2);
  const auto dir = std::filesystem::temp_directory_path() / "cogrisk-sac-test";
  std::filesystem::create_directories(dir);
  a.save(dir / "ckpt.txt");
  b.load(dir / "ckpt.txt");
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i].value == *tb[i].value);
  SacConfig other = c;
  other.network.mlp_hidden = 16;
  SacAgent mismatch(other, 3);
  CHECK_THROWS_AS(mismatch.load(dir / "ckpt.txt"), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("targets start as copies and track the online critics") {
  SacConfig c;
  c.network = tiny();
  c.batch_size = 8;
  SacAgent agent(c, 5);
  for (int i = 0; i < 2; ++i) {
    const auto on = nn::values(agent.critic(i).tensors());
    const auto tg = nn::values(agent.target(i).tensors());
    for (std::size_t k = 0; k < on.size(); ++k) CHECK(*on[k] == *tg[k]);
  }
  Environment env;
  const Scenario s = single_crossing_scenario();
  ReplayBuffer buf(64);
  Rng rng(5);
  Observation obs = env.reset(s, 1);
  while (buf.size() < 16) {
    const auto out = agent.act(obs, rng, false);
    StepResult r = env.step({out.action.x(), out.action.y()});
    buf.push({obs, out.unit_action, r.reward, r.observation, r.done, env.uncertainties()});
    obs = r.done ? env.reset(s, buf.size()) : r.observation;
  }
  std::vector<Matrix> before;
  for (Matrix* m : nn::values(agent.target(0).tensors())) before.push_back(*m);
  const auto stats = agent.update(sample_minibatch(buf, 8, rng), rng);
  CHECK(std::isfinite(stats.critic_loss));
  CHECK(std::isfinite(stats.actor_loss));
  const auto on = nn::values(agent.critic(0).tensors());
  const auto tg = nn::values(agent.target(0).tensors());
  bool moved = false;
  for (std::size_t k = 0; k < on.size(); ++k) {
    // After one update the target lies on the segment between its old value and the online value.
    const Matrix expected = c.tau * *on[k] + (1.0 - c.tau) * before[k];
    CHECK((*tg[k] - expected).cwiseAbs().maxCoeff() < 1e-12);
    moved = moved || *tg[k] != before[k];
  }
  CHECK(moved);
}

TEST_CASE("training is deterministic and honours zero episodes") {
  SacConfig c;
  c.network = tiny();
  c.batch_size = 16;
  c.warmup = 16;
  c.episodes = 3;
  const std::vector<Scenario> s{single_crossing_scenario()};
  const auto r1 = train(s, c, EnvConfig{}, 9);
  const auto r2 = train(s, c, EnvConfig{}, 9);
  REQUIRE(r1.rows.size() == 3);
  for (std::size_t i = 0; i < r1.rows.size(); ++i)
    CHECK(training_csv_row(r1.rows[i]) == training_csv_row(r2.rows[i]));

  c.episodes = 0;
  auto untouched = train(s, c, EnvConfig{}, 9);
  SacAgent fresh(c, substream_seed(9, "agent"));
  const auto a = untouched.agent.tensors(), b = fresh.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].value == *b[i].value);
  CHECK(untouched.rows.empty());
}

}
