#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "cogrisk/error.hpp"
#include "cogrisk/neural.hpp"
#include "cogrisk/risk.hpp"
#include "oracles.hpp"

using namespace cogrisk;
using namespace cogrisk::nn;
using doctest::Approx;

namespace {

LayerParams layer(const Matrix& w, const Matrix& b, Activation act) {
  LayerParams l;
  l.weight = w;
  l.bias = b;
  l.activation = act;
  return l;
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("gcn layer special cases") {
  const Matrix h = (Matrix(1, 3) << 0.5, 0.0, 2.0).finished();
  const LayerParams id = layer(Matrix::Identity(3, 3), Matrix::Zero(1, 3), Activation::kRelu);
  CHECK(gcn_layer(h, normalize_adjacency(Matrix::Zero(1, 1)), id) == h);

  testing::Gen gen(37);
  const Matrix h2 = gen.matrix(2, 4);
  const LayerParams l = LayerParams::init(4, 3, Activation::kIdentity, gen.rng);
  const Matrix norm = normalize_adjacency(Matrix::Zero(2, 2));
  CHECK(norm.isApprox(Matrix::Identity(2, 2)));
  const Matrix y = gcn_layer(h2, norm, l);
  for (int i = 0; i < 2; ++i) {
    const Matrix own = h2.row(i) * l.weight + l.bias;
    CHECK((y.row(i) - own).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("gcn layer matches a dense oracle") {
  testing::Gen gen(41);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = gen.integer(1, 6);
    Matrix a = gen.matrix(n, n).cwiseAbs();
    a.diagonal().setZero();
    const Matrix norm = normalize_adjacency(a);
    CHECK((norm - testing::dense_normalized(a)).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix h = gen.matrix(n, 5);
    const bool relu = trial % 2 == 0;
    const LayerParams l =
        LayerParams::init(5, 4, relu ? Activation::kRelu : Activation::kIdentity, gen.rng);
    const Matrix expected = testing::dense_gcn(norm, h, l.weight, l.bias, relu);
    CHECK((gcn_layer(h, norm, l) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("mlp forward") {
  Eigen::VectorXd x(2);
  x << 0.3, -1.2;
  const std::vector<LayerParams> id{layer(Matrix::Identity(2, 2), Matrix::Zero(1, 2), Activation::kIdentity)};
  CHECK(mlp_forward(x, id) == x);

  const std::vector<LayerParams> neg{
      layer(-Matrix::Identity(2, 2), (Matrix(1, 2) << -5, -5).finished(), Activation::kRelu)};
  CHECK(mlp_forward(x, neg).isZero(0.0));

  // y = relu(x W + b) with W = [[1, 2], [3, 4]], b = [0.5, -1]
  const std::vector<LayerParams> fixed{layer((Matrix(2, 2) << 1, 2, 3, 4).finished(),
                                             (Matrix(1, 2) << 0.5, -1).finished(), Activation::kRelu)};
  Eigen::VectorXd in(2);
  in << 1.0, 2.0;
  const Eigen::VectorXd y = mlp_forward(in, fixed);
  CHECK(y(0) == Approx(7.5));
  CHECK(y(1) == Approx(9.0));
}

TEST_CASE("dense backward") {
  testing::Gen gen(43);
  const LayerParams zero_w = layer(Matrix::Zero(3, 2), Matrix::Zero(1, 2), Activation::kIdentity);
  const Matrix x = gen.matrix(4, 3);
  DenseCache c;
  const Matrix out = dense_forward(zero_w, x, &c);
  LayerParams grad = layer(Matrix::Zero(3, 2), Matrix::Zero(1, 2), Activation::kIdentity);
  dense_backward(zero_w, c, out, &grad);  // d(0.5 |xW|^2)/d(xW) = xW = 0
  CHECK(grad.weight.isZero(0.0));

  LayerParams l = LayerParams::init(3, 2, Activation::kTanh, gen.rng);
  dense_forward(l, x, &c);
  grad.weight.setZero();
  grad.bias.setZero();
  dense_backward(l, c, Matrix::Zero(4, 2), &grad);
  CHECK(grad.weight.isZero(0.0));
  CHECK(grad.bias.isZero(0.0));
}

TEST_CASE("dense layer gradients match finite differences") {
  for (Activation act : {Activation::kTanh, Activation::kIdentity, Activation::kRelu}) {
    testing::Gen gen(47);
    LayerParams l = LayerParams::init(5, 3, act, gen.rng);
    const Matrix x = gen.matrix(6, 5);
    const Matrix target = gen.matrix(6, 3);
    auto loss = [&] {
      const Matrix y = dense_forward(l, x, nullptr);
      return 0.5 * (y - target).squaredNorm();
    };
    DenseCache c;
    const Matrix y = dense_forward(l, x, &c);
    LayerParams g = l;
    g.weight.setZero();
    g.bias.setZero();
    dense_backward(l, c, y - target, &g);
    std::vector<NamedTensor> params;
    l.append_tensors("l", params);
    const auto result = testing::check_gradients(loss, params, {&g.weight, &g.bias});
    CHECK_MESSAGE(result.max_relative_error < 1e-6, result.worst);
  }
}

TEST_CASE("encoder output sizes") {
  Rng rng(1);
  NetworkConfig cfg;
  CHECK(Encoder(cfg, rng).output_dim() == 2 * 64 + 2);
  cfg.encoder = EncoderKind::kFlat;
  CHECK(Encoder(cfg, rng).output_dim() == 4 * kNodeFeatureDim + 2);
  CHECK(parse_encoder_kind(to_string(EncoderKind::kFlat)) == EncoderKind::kFlat);
}

TEST_CASE("GCN encoder is invariant to pedestrian order") {
  testing::Gen gen(53);
  Rng rng(2);
  const Encoder enc(NetworkConfig{}, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = gen.integer(2, 5);
    Matrix f = gen.matrix(n, kNodeFeatureDim);
    Matrix a = gen.matrix(n, n).cwiseAbs();
    a = (a + a.transpose()).eval();
    a.diagonal().setZero();
    const Matrix norm = normalize_adjacency(a);
    Eigen::VectorXi order(n);
    order(0) = 0;
    for (int i = 1; i < n; ++i) order(i) = n - i;
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(order);
    const Matrix f2 = perm.transpose() * f;
    const Matrix norm2 = perm.transpose() * norm * perm;
    const Vec2 extras(0.2, -0.1);
    const std::vector<GraphSample> s1{{&f, &norm, extras}}, s2{{&f2, &norm2, extras}};
    const Matrix e1 = enc.forward(make_graph_batch(s1), nullptr);
    const Matrix e2 = enc.forward(make_graph_batch(s2), nullptr);
    CHECK((e1 - e2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("squashed policy") {
  const Vec2 bounds(2.0, 0.2);
  const PolicyOutput det = policy_from_noise(Vec2::Zero(), Vec2(-1, 0.5), Vec2::Zero(), bounds);
  CHECK(det.action.isZero(0.0));
  testing::Gen gen(59);
  for (int i = 0; i < 1000; ++i) {
    const PolicyOutput o = policy_from_noise(gen.point(5.0), gen.point(2.0),
                                             Vec2(gen.normal() * 5, gen.normal() * 5), bounds);
    CHECK(std::abs(o.action.x()) <= bounds.x());
    CHECK(std::abs(o.action.y()) <= bounds.y());
    CHECK(std::isfinite(o.log_prob));
  }
  CHECK(log_one_minus_tanh_sq(0.0) == 0.0);
  CHECK(std::isfinite(log_one_minus_tanh_sq(400.0)));
  CHECK(log_one_minus_tanh_sq(30.0) == Approx(std::log(4.0) - 60.0).epsilon(1e-12));
}

TEST_CASE("log_prob matches a Monte-Carlo density estimate") {
  const Vec2 bounds(2.0, 0.2);
  const Vec2 mean(0.3, -0.4), log_std(-0.5, -0.2);
  Rng rng(61);
  const int samples = 1'000'000;
  const Vec2 half(0.05, 0.005);
  const std::vector<Vec2> probes{Vec2(0.5, -0.06), Vec2(0.1, -0.1), Vec2(1.0, 0.0)};
  std::vector<int> counts(probes.size(), 0);
  for (int i = 0; i < samples; ++i) {
    const Vec2 a = policy_sample(mean, log_std, rng, bounds).action;
    for (std::size_t p = 0; p < probes.size(); ++p) {
      if (std::abs(a.x() - probes[p].x()) < half.x() && std::abs(a.y() - probes[p].y()) < half.y())
        ++counts[p];
    }
  }
  const double area = 4.0 * half.x() * half.y();
  for (std::size_t p = 0; p < probes.size(); ++p) {
    Vec2 eps;
    for (int k = 0; k < 2; ++k)
      eps[k] = (std::atanh(probes[p][k] / bounds[k]) - mean[k]) / std::exp(log_std[k]);
    const PolicyOutput o = policy_from_noise(mean, log_std, eps, bounds);
    CHECK((o.action - probes[p]).norm() < 1e-12);
    const double frac = static_cast<double>(counts[p]) / samples;
    const double estimate = frac / area;
    const double se = std::sqrt(frac * (1.0 - frac) / samples) / area;
    CHECK_MESSAGE(std::abs(std::exp(o.log_prob) - estimate) < 3.0 * se,
                  "probe " << p << " analytic " << std::exp(o.log_prob) << " estimate " << estimate);
  }
}

TEST_CASE("Adam") {
  Matrix x = (Matrix(1, 3) << 3.0, -2.0, 0.5).finished();
  const Matrix target = (Matrix(1, 3) << -1.0, 1.0, 2.0).finished();
  Matrix g = Matrix::Zero(1, 3);
  AdamState s = make_adam_state({&x});
  const Matrix before = x;
  optimizer_step({&x}, {&g}, s, {});
  CHECK(x == before);

  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  auto run = [&](Matrix start) {
    AdamState st = make_adam_state({&start});
    std::vector<Matrix> path;
    for (int i = 0; i < 500; ++i) {
      Matrix grad = start - target;
      optimizer_step({&start}, {&grad}, st, cfg);
      path.push_back(start);
    }
    return path;
  };
  const auto p1 = run(x), p2 = run(x);
  CHECK((p1.back() - target).cwiseAbs().maxCoeff() < 1e-3);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
}

TEST_CASE("soft update") {
  Matrix online = Matrix::Constant(2, 2, 2.0), target = Matrix::Zero(2, 2);
  soft_update({&target}, {&online}, 0.5);
  CHECK(target(0, 0) == 1.0);
  soft_update({&target}, {&online}, 0.0);
  CHECK(target(1, 1) == 1.0);
  soft_update({&target}, {&online}, 1.0);
  CHECK(target == online);

  testing::Gen gen(67);
  for (int i = 0; i < 100; ++i) {
    Matrix a = gen.matrix(3, 3), b = gen.matrix(3, 3);
    Matrix t = b;
    const double tau = gen.uniform(0.0, 1.0);
    soft_update({&t}, {&a}, tau);
    for (Eigen::Index k = 0; k < 9; ++k) {
      CHECK(t.data()[k] >= std::min(a.data()[k], b.data()[k]) - 1e-15);
      CHECK(t.data()[k] <= std::max(a.data()[k], b.data()[k]) + 1e-15);
    }
  }
}

TEST_CASE("tensor checkpoint round trip") {
  Rng rng(71);
  NetworkConfig cfg;
  cfg.gcn_hidden = 8;
  cfg.mlp_hidden = 8;
  Actor a(cfg, rng), b(cfg, rng);
  std::stringstream ss;
  write_tensors(ss, 42, a.tensors());
  std::stringstream copy(ss.str());
  read_tensors(copy, 42, b.tensors());
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i].value == *tb[i].value);
  std::stringstream wrong(ss.str());
  CHECK_THROWS_AS(read_tensors(wrong, 43, b.tensors()), ValidationError);
  Critic c(cfg, rng);
  std::stringstream other(ss.str());
  CHECK_THROWS_AS(read_tensors(other, 42, c.tensors()), ValidationError);
}

}
