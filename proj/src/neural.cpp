#include "cogrisk/neural.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "cogrisk/error.hpp"
#include "cogrisk/risk.hpp"

namespace cogrisk::nn {
namespace {

void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("shape mismatch: " + what);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

Matrix activate(const Matrix& pre, Activation act) {
  switch (act) {
    case Activation::kRelu: return pre.cwiseMax(0.0);
    case Activation::kTanh: return pre.array().tanh().matrix();
    case Activation::kIdentity: return pre;
  }
  return pre;
}

Matrix activation_backward(const Matrix& pre, const Matrix& out, const Matrix& dout,
                           Activation act) {
  switch (act) {
    case Activation::kRelu: return (pre.array() > 0.0).select(dout, 0.0);
    case Activation::kTanh: return (dout.array() * (1.0 - out.array().square())).matrix();
    case Activation::kIdentity: return dout;
  }
  return dout;
}

LayerParams LayerParams::init(int in, int out, Activation act, Rng& rng) {
  LayerParams p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  p.weight.resize(in, out);
  for (Eigen::Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = dist(rng);
  p.bias.resize(1, out);
  for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias.data()[i] = dist(rng);
  p.activation = act;
  return p;
}

void LayerParams::append_tensors(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Matrix gcn_layer(const Matrix& h, const Matrix& norm_adj, const LayerParams& params) {
  require_shape(norm_adj.rows() == h.rows() && norm_adj.cols() == h.rows(),
                "gcn adjacency must be N x N for N input rows");
  require_shape(h.cols() == params.in(), "gcn input width vs weight rows");
  Matrix pre = norm_adj * h * params.weight;
  pre.rowwise() += params.bias.row(0);
  return activate(pre, params.activation);
}

Eigen::VectorXd mlp_forward(const Eigen::VectorXd& x, std::span<const LayerParams> layers) {
  Matrix row = x.transpose();
  for (const LayerParams& layer : layers) row = dense_forward(layer, row, nullptr);
  return row.transpose();
}

Matrix dense_forward(const LayerParams& layer, const Matrix& x, DenseCache* cache) {
  require_shape(x.cols() == layer.in(), "dense input width " + std::to_string(x.cols()) +
                                            " vs " + std::to_string(layer.in()));
  Matrix pre = x * layer.weight;
  pre.rowwise() += layer.bias.row(0);
  Matrix out = activate(pre, layer.activation);
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->out = out;
  }
  return out;
}

Matrix dense_backward(const LayerParams& layer, const DenseCache& cache, const Matrix& dout,
                      LayerParams* grad, bool want_input) {
  const Matrix dpre = activation_backward(cache.pre, cache.out, dout, layer.activation);
  if (grad) {
    grad->weight.noalias() += cache.input.transpose() * dpre;
    grad->bias += dpre.colwise().sum();
  }
  if (!want_input) return {};
  return dpre * layer.weight.transpose();
}

GraphBatch make_graph_batch(std::span<const GraphSample> samples) {
  GraphBatch batch;
  Eigen::Index total = 0;
  Eigen::Index width = -1;
  batch.offsets.reserve(samples.size() + 1);
  batch.offsets.push_back(0);
  for (const GraphSample& s : samples) {
    const Matrix& f = *s.features;
    require_shape(s.normalized_adj->rows() == f.rows() && s.normalized_adj->cols() == f.rows(),
                  "graph sample adjacency vs feature rows");
    if (width < 0) width = f.cols();
    require_shape(f.cols() == width, "graph samples must share a feature width");
    total += f.rows();
    batch.offsets.push_back(total);
  }
  batch.features.resize(total, std::max<Eigen::Index>(width, 0));
  batch.extras.resize(static_cast<Eigen::Index>(samples.size()), 2);
  batch.adjacency.reserve(samples.size());
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const Matrix& f = *samples[b].features;
    batch.features.middleRows(batch.offsets[b], f.rows()) = f;
    batch.adjacency.push_back(*samples[b].normalized_adj);
    batch.extras.row(static_cast<Eigen::Index>(b)) = samples[b].extras.transpose();
  }
  return batch;
}

std::string to_string(EncoderKind kind) { return kind == EncoderKind::kGcn ? "gcn" : "flat"; }

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "gcn") return EncoderKind::kGcn;
  if (name == "flat") return EncoderKind::kFlat;
  throw ValidationError("unknown encoder kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const NetworkConfig& config, Rng& rng)
    : kind_(config.encoder), max_agents_(config.max_agents), hidden_(config.gcn_hidden) {
  if (kind_ == EncoderKind::kGcn) {
    layers_.push_back(LayerParams::init(kNodeFeatureDim, hidden_, Activation::kRelu, rng));
    layers_.push_back(LayerParams::init(hidden_, hidden_, Activation::kRelu, rng));
  }
}

Eigen::Index Encoder::output_dim() const {
  if (kind_ == EncoderKind::kGcn) return 2 * hidden_ + 2;
  return static_cast<Eigen::Index>(max_agents_) * kNodeFeatureDim + 2;
}

Matrix Encoder::forward(const GraphBatch& batch, EncoderCache* cache) const {
  const Eigen::Index nb = batch.size();
  Matrix embedding = Matrix::Zero(nb, output_dim());
  if (kind_ == EncoderKind::kFlat) {
    for (Eigen::Index b = 0; b < nb; ++b) {
      const Eigen::Index n = batch.nodes(b);
      if (n > max_agents_) {
        throw ValidationError("flat encoder holds at most " + std::to_string(max_agents_) +
                              " agents, got " + std::to_string(n));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        embedding.block(b, i * kNodeFeatureDim, 1, kNodeFeatureDim) =
            batch.features.row(batch.offsets[b] + i);
      }
      embedding.block(b, output_dim() - 2, 1, 2) = batch.extras.row(b);
    }
    return embedding;
  }

  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.z.clear();
  c.pre.clear();
  c.h.clear();
  const Matrix* input = &batch.features;
  for (const LayerParams& layer : layers_) {
    require_shape(input->cols() == layer.in(), "gcn layer input width");
    Matrix z = (*input) * layer.weight;
    Matrix pre(z.rows(), z.cols());
    for (Eigen::Index b = 0; b < nb; ++b) {
      const Eigen::Index off = batch.offsets[b];
      const Eigen::Index n = batch.nodes(b);
      pre.middleRows(off, n).noalias() = batch.adjacency[b] * z.middleRows(off, n);
    }
    pre.rowwise() += layer.bias.row(0);
    c.h.push_back(activate(pre, layer.activation));
    c.z.push_back(std::move(z));
    c.pre.push_back(std::move(pre));
    input = &c.h.back();
  }
  const Matrix& top = c.h.back();
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Eigen::Index off = batch.offsets[b];
    const Eigen::Index n = batch.nodes(b);
    embedding.block(b, 0, 1, hidden_) = top.middleRows(off, n).colwise().mean();
    embedding.block(b, hidden_, 1, hidden_) = top.row(off);
    embedding.block(b, 2 * hidden_, 1, 2) = batch.extras.row(b);
  }
  return embedding;
}

void Encoder::backward(const GraphBatch& batch, const EncoderCache& cache,
                       const Matrix& d_embedding, Encoder* grad) const {
  if (kind_ == EncoderKind::kFlat || grad == nullptr) return;
  const Eigen::Index nb = batch.size();
  Matrix dh = Matrix::Zero(cache.h.back().rows(), hidden_);
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Eigen::Index off = batch.offsets[b];
    const Eigen::Index n = batch.nodes(b);
    const Eigen::RowVectorXd d_mean = d_embedding.block(b, 0, 1, hidden_) / static_cast<double>(n);
    dh.middleRows(off, n).rowwise() += d_mean;
    dh.row(off) += d_embedding.block(b, hidden_, 1, hidden_);
  }
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const LayerParams& layer = layers_[l];
    const Matrix dpre = activation_backward(cache.pre[l], cache.h[l], dh, layer.activation);
    Matrix dz(dpre.rows(), dpre.cols());
    for (Eigen::Index b = 0; b < nb; ++b) {
      const Eigen::Index off = batch.offsets[b];
      const Eigen::Index n = batch.nodes(b);
      dz.middleRows(off, n).noalias() = batch.adjacency[b].transpose() * dpre.middleRows(off, n);
    }
    const Matrix& input = l == 0 ? batch.features : cache.h[l - 1];
    LayerParams& g = grad->layers_[l];
    g.weight.noalias() += input.transpose() * dz;
    g.bias += dpre.colwise().sum();
    if (l > 0) dh = dz * layer.weight.transpose();
  }
}

void Encoder::append_tensors(const std::string& prefix, std::vector<NamedTensor>& out) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].append_tensors(prefix + ".gcn" + std::to_string(l), out);
  }
}

// ---------------------------------------------------------------------------
// Actor

Actor::Actor(const NetworkConfig& config, Rng& rng) : config_(config), encoder_(config, rng) {
  const int e = static_cast<int>(encoder_.output_dim());
  trunk1_ = LayerParams::init(e, config.mlp_hidden, Activation::kRelu, rng);
  trunk2_ = LayerParams::init(config.mlp_hidden, config.mlp_hidden, Activation::kRelu, rng);
  mean_head_ = LayerParams::init(config.mlp_hidden, 2, Activation::kIdentity, rng);
  log_std_head_ = LayerParams::init(config.mlp_hidden, 2, Activation::kIdentity, rng);
}

void Actor::forward(const GraphBatch& batch, ActorCache& cache) const {
  cache.batch = &batch;
  cache.embedding = encoder_.forward(batch, &cache.encoder);
  const Matrix h1 = dense_forward(trunk1_, cache.embedding, &cache.trunk1);
  const Matrix h2 = dense_forward(trunk2_, h1, &cache.trunk2);
  cache.mean = dense_forward(mean_head_, h2, &cache.mean_head);
  cache.log_std_raw = dense_forward(log_std_head_, h2, &cache.log_std_head);
  cache.log_std = cache.log_std_raw.cwiseMax(config_.log_std_min).cwiseMin(config_.log_std_max);
}

void Actor::backward(const ActorCache& cache, const Matrix& d_mean, const Matrix& d_log_std,
                     Actor* grad) const {
  const Matrix d_raw = ((cache.log_std_raw.array() > config_.log_std_min) &&
                        (cache.log_std_raw.array() < config_.log_std_max))
                           .select(d_log_std, 0.0);
  Matrix dh2 = dense_backward(mean_head_, cache.mean_head, d_mean, &grad->mean_head_);
  dh2 += dense_backward(log_std_head_, cache.log_std_head, d_raw, &grad->log_std_head_);
  const Matrix dh1 = dense_backward(trunk2_, cache.trunk2, dh2, &grad->trunk2_);
  const Matrix de = dense_backward(trunk1_, cache.trunk1, dh1, &grad->trunk1_);
  encoder_.backward(*cache.batch, cache.encoder, de, &grad->encoder_);
}

std::vector<NamedTensor> Actor::tensors(const std::string& prefix) {
  std::vector<NamedTensor> out;
  encoder_.append_tensors(prefix + ".encoder", out);
  trunk1_.append_tensors(prefix + ".trunk1", out);
  trunk2_.append_tensors(prefix + ".trunk2", out);
  mean_head_.append_tensors(prefix + ".mean", out);
  log_std_head_.append_tensors(prefix + ".log_std", out);
  return out;
}

// ---------------------------------------------------------------------------
// Critic

Critic::Critic(const NetworkConfig& config, Rng& rng) : config_(config), encoder_(config, rng) {
  const int e = static_cast<int>(encoder_.output_dim());
  l1_ = LayerParams::init(e + 2, config.mlp_hidden, Activation::kRelu, rng);
  l2_ = LayerParams::init(config.mlp_hidden, config.mlp_hidden, Activation::kRelu, rng);
  out_ = LayerParams::init(config.mlp_hidden, 1, Activation::kIdentity, rng);
}

Matrix Critic::forward(const GraphBatch& batch, const Matrix& actions, CriticCache* cache) const {
  require_shape(actions.rows() == batch.size() && actions.cols() == 2, "critic actions");
  CriticCache local;
  CriticCache& c = cache ? *cache : local;
  c.batch = &batch;
  const Matrix embedding = encoder_.forward(batch, &c.encoder);
  c.embedding_dim = embedding.cols();
  Matrix x(embedding.rows(), embedding.cols() + 2);
  x << embedding, actions;
  const Matrix h1 = dense_forward(l1_, x, &c.l1);
  const Matrix h2 = dense_forward(l2_, h1, &c.l2);
  return dense_forward(out_, h2, &c.out);
}

Matrix Critic::backward(const CriticCache& cache, const Matrix& dq, Critic* grad) const {
  const Matrix dh2 = dense_backward(out_, cache.out, dq, grad ? &grad->out_ : nullptr);
  const Matrix dh1 = dense_backward(l2_, cache.l2, dh2, grad ? &grad->l2_ : nullptr);
  const Matrix dx = dense_backward(l1_, cache.l1, dh1, grad ? &grad->l1_ : nullptr);
  if (grad) {
    encoder_.backward(*cache.batch, cache.encoder, dx.leftCols(cache.embedding_dim),
                      &grad->encoder_);
  }
  return dx.rightCols(2);
}

std::vector<NamedTensor> Critic::tensors(const std::string& prefix) {
  std::vector<NamedTensor> out;
  encoder_.append_tensors(prefix + ".encoder", out);
  l1_.append_tensors(prefix + ".l1", out);
  l2_.append_tensors(prefix + ".l2", out);
  out_.append_tensors(prefix + ".out", out);
  return out;
}

std::vector<Matrix*> values(const std::vector<NamedTensor>& tensors) {
  std::vector<Matrix*> out;
  out.reserve(tensors.size());
  for (const NamedTensor& t : tensors) out.push_back(t.value);
  return out;
}

void zero(const std::vector<NamedTensor>& tensors) {
  for (const NamedTensor& t : tensors) t.value->setZero();
}

// ---------------------------------------------------------------------------
// Squashed Gaussian policy

double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

PolicyOutput policy_from_noise(const Vec2& mean, const Vec2& log_std, const Vec2& eps,
                               const Vec2& bounds) {
  PolicyOutput out;
  out.mean = mean;
  out.log_std = log_std;
  out.log_prob = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double u = mean[k] + std::exp(log_std[k]) * eps[k];
    out.unit_action[k] = std::tanh(u);
    out.action[k] = out.unit_action[k] * bounds[k];
    out.log_prob += -0.5 * eps[k] * eps[k] - log_std[k] - kHalfLog2Pi -
                    log_one_minus_tanh_sq(u) - std::log(bounds[k]);
  }
  return out;
}

PolicyOutput policy_sample(const Vec2& mean, const Vec2& log_std, Rng& rng, const Vec2& bounds,
                           bool deterministic) {
  Vec2 eps = Vec2::Zero();
  if (!deterministic) {
    std::normal_distribution<double> normal(0.0, 1.0);
    eps[0] = normal(rng);
    eps[1] = normal(rng);
  }
  return policy_from_noise(mean, log_std, eps, bounds);
}

SquashedBatch squash(const Matrix& mean, const Matrix& log_std, const Matrix& eps,
                     const Vec2& bounds) {
  SquashedBatch s;
  s.eps = eps;
  s.pre_tanh = mean.array() + log_std.array().exp() * eps.array();
  s.unit_action = s.pre_tanh.array().tanh();
  s.log_prob.resize(mean.rows(), 1);
  const double log_scale = std::log(bounds[0]) + std::log(bounds[1]);
  for (Eigen::Index b = 0; b < mean.rows(); ++b) {
    double lp = -log_scale;
    for (Eigen::Index k = 0; k < mean.cols(); ++k) {
      lp += -0.5 * eps(b, k) * eps(b, k) - log_std(b, k) - kHalfLog2Pi -
            log_one_minus_tanh_sq(s.pre_tanh(b, k));
    }
    s.log_prob(b, 0) = lp;
  }
  return s;
}

void squash_backward(const Matrix& log_std, const SquashedBatch& s, const Matrix& d_unit_action,
                     const Matrix& d_log_prob, Matrix& d_mean, Matrix& d_log_std) {
  const Eigen::ArrayXXd t = s.unit_action.array();
  const Eigen::ArrayXXd sigma_eps = log_std.array().exp() * s.eps.array();
  // d(log_prob)/du = 2 tanh(u); d(unit)/du = 1 - tanh^2(u)
  Eigen::ArrayXXd du = d_unit_action.array() * (1.0 - t.square());
  du += (2.0 * t).colwise() * d_log_prob.col(0).array();
  d_mean = du.matrix();
  Eigen::ArrayXXd dls = du * sigma_eps;
  dls -= Eigen::ArrayXXd::Ones(t.rows(), t.cols()).colwise() * d_log_prob.col(0).array();
  d_log_std = dls.matrix();
}

// ---------------------------------------------------------------------------
// Optimizer and target updates

AdamState make_adam_state(const std::vector<Matrix*>& params) {
  AdamState s;
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void optimizer_step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads,
                    AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ValidationError("optimizer parameter/gradient count mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    const Matrix& g = *grads[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    params[i]->array() -= config.learning_rate * (m.array() / c1) /
                          ((v.array() / c2).sqrt() + config.epsilon);
  }
}

void soft_update(const std::vector<Matrix*>& target, const std::vector<Matrix*>& online,
                 double tau) {
  if (target.size() != online.size()) throw ValidationError("soft update tensor count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    *target[i] = tau * (*online[i]) + (1.0 - tau) * (*target[i]);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint text format

void write_tensors(std::ostream& os, std::uint64_t config_hash,
                   const std::vector<NamedTensor>& tensors) {
  os << "cogrisk-checkpoint 1\n";
  os << "config_hash " << config_hash << "\n";
  os << "tensors " << tensors.size() << "\n";
  char buf[64];
  for (const NamedTensor& t : tensors) {
    const Matrix& m = *t.value;
    os << "tensor " << t.name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", m(r, c));
        os << (c ? " " : "") << buf;
      }
      os << '\n';
    }
  }
}

void read_tensors(std::istream& is, std::uint64_t expected_hash,
                  const std::vector<NamedTensor>& tensors) {
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "cogrisk-checkpoint" || version != 1) {
    throw ValidationError("not a cogrisk checkpoint (version 1)");
  }
  std::uint64_t hash = 0;
  if (!(is >> word >> hash) || word != "config_hash") throw ValidationError("missing config hash");
  if (hash != expected_hash) {
    throw ValidationError("checkpoint config hash " + std::to_string(hash) +
                          " does not match the current network config " +
                          std::to_string(expected_hash));
  }
  std::size_t count = 0;
  if (!(is >> word >> count) || word != "tensors") throw ValidationError("missing tensor count");
  if (count != tensors.size()) {
    throw ValidationError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                          std::to_string(tensors.size()));
  }
  for (const NamedTensor& t : tensors) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> word >> name >> rows >> cols) || word != "tensor") {
      throw ValidationError("malformed tensor header near " + t.name);
    }
    if (name != t.name || rows != t.value->rows() || cols != t.value->cols()) {
      throw ValidationError("checkpoint tensor " + name + " (" + std::to_string(rows) + "x" +
                            std::to_string(cols) + ") does not match expected " + t.name + " (" +
                            std::to_string(t.value->rows()) + "x" +
                            std::to_string(t.value->cols()) + ")");
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(is >> word)) throw ValidationError("truncated tensor " + name);
        char* end = nullptr;
        const double v = std::strtod(word.c_str(), &end);
        if (end == word.c_str() || *end != '\0' || !std::isfinite(v)) {
          throw ValidationError("bad value '" + word + "' in tensor " + name);
        }
        (*t.value)(r, c) = v;
      }
    }
  }
}

}  // namespace cogrisk::nn
