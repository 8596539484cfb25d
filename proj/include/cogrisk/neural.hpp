#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cogrisk/rng.hpp"
#include "cogrisk/world.hpp"

namespace cogrisk::nn {

using Matrix = Eigen::MatrixXd;

enum class Activation { kRelu, kTanh, kIdentity };

Matrix activate(const Matrix& pre, Activation act);
// d(loss)/d(pre) given d(loss)/d(out).
Matrix activation_backward(const Matrix& pre, const Matrix& out, const Matrix& dout,
                           Activation act);

struct NamedTensor {
  std::string name;
  Matrix* value;
};

struct LayerParams {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
  Activation activation = Activation::kIdentity;

  static LayerParams init(int in, int out, Activation act, Rng& rng);
  Eigen::Index in() const { return weight.rows(); }
  Eigen::Index out() const { return weight.cols(); }
  void append_tensors(const std::string& prefix, std::vector<NamedTensor>& out);
};

// act(norm_adj * h * W + b) for a single graph.
Matrix gcn_layer(const Matrix& h, const Matrix& norm_adj, const LayerParams& params);

Eigen::VectorXd mlp_forward(const Eigen::VectorXd& x, std::span<const LayerParams> layers);

// Batched dense layer, one sample per row.
struct DenseCache {
  Matrix input;
  Matrix pre;
  Matrix out;
};
Matrix dense_forward(const LayerParams& layer, const Matrix& x, DenseCache* cache);
// Accumulates parameter gradients into `grad` when non-null; returns d(loss)/d(input).
Matrix dense_backward(const LayerParams& layer, const DenseCache& cache, const Matrix& dout,
                      LayerParams* grad, bool want_input = true);

// One observation as seen by the networks.
struct GraphSample {
  const Matrix* features;        // N x 9
  const Matrix* normalized_adj;  // N x N
  Vec2 extras = Vec2::Zero();
};

// Several graphs with their node rows stacked.
struct GraphBatch {
  Matrix features;                      // total_nodes x d
  std::vector<Matrix> adjacency;        // per-sample normalized adjacency
  std::vector<Eigen::Index> offsets;    // size batch + 1
  Matrix extras;                        // batch x 2

  Eigen::Index size() const { return static_cast<Eigen::Index>(adjacency.size()); }
  Eigen::Index nodes(Eigen::Index b) const { return offsets[b + 1] - offsets[b]; }
};

GraphBatch make_graph_batch(std::span<const GraphSample> samples);

enum class EncoderKind { kGcn, kFlat };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& name);

struct NetworkConfig {
  EncoderKind encoder = EncoderKind::kGcn;
  int gcn_hidden = 64;
  int mlp_hidden = 128;
  int max_agents = 4;  // flat encoder padding
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

struct EncoderCache {
  std::vector<Matrix> z;    // H W per layer (stacked nodes)
  std::vector<Matrix> pre;  // A (H W) + b per layer
  std::vector<Matrix> h;    // activations per layer
};

/// Maps a batch of graphs to fixed-size embeddings.
///
/// GCN mode: two relu graph-convolution layers, then the mean over nodes
/// concatenated with the AV node's row and the AV extras. Flat mode has no
/// parameters and concatenates zero-padded node rows plus extras.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const NetworkConfig& config, Rng& rng);

  Eigen::Index output_dim() const;
  Matrix forward(const GraphBatch& batch, EncoderCache* cache) const;
  void backward(const GraphBatch& batch, const EncoderCache& cache, const Matrix& d_embedding,
                Encoder* grad) const;
  void append_tensors(const std::string& prefix, std::vector<NamedTensor>& out);

  const std::vector<LayerParams>& layers() const { return layers_; }

 private:
  EncoderKind kind_ = EncoderKind::kGcn;
  int max_agents_ = 4;
  int hidden_ = 64;
  std::vector<LayerParams> layers_;
};

struct ActorCache {
  GraphBatch const* batch = nullptr;
  EncoderCache encoder;
  Matrix embedding;
  DenseCache trunk1, trunk2, mean_head, log_std_head;
  Matrix mean;           // batch x 2
  Matrix log_std;        // clamped, batch x 2
  Matrix log_std_raw;    // pre-clamp
};

class Actor {
 public:
  Actor() = default;
  Actor(const NetworkConfig& config, Rng& rng);

  void forward(const GraphBatch& batch, ActorCache& cache) const;
  void backward(const ActorCache& cache, const Matrix& d_mean, const Matrix& d_log_std,
                Actor* grad) const;
  std::vector<NamedTensor> tensors(const std::string& prefix = "actor");

 private:
  NetworkConfig config_;
  Encoder encoder_;
  LayerParams trunk1_, trunk2_, mean_head_, log_std_head_;
};

struct CriticCache {
  GraphBatch const* batch = nullptr;
  EncoderCache encoder;
  Eigen::Index embedding_dim = 0;
  DenseCache l1, l2, out;
};

class Critic {
 public:
  Critic() = default;
  Critic(const NetworkConfig& config, Rng& rng);

  // Q values as a batch x 1 column. `actions` are unit actions in [-1, 1].
  Matrix forward(const GraphBatch& batch, const Matrix& actions, CriticCache* cache) const;
  // Returns d(loss)/d(actions). Parameter gradients accumulate into `grad` when non-null.
  Matrix backward(const CriticCache& cache, const Matrix& dq, Critic* grad) const;
  std::vector<NamedTensor> tensors(const std::string& prefix = "critic");

 private:
  NetworkConfig config_;
  Encoder encoder_;
  LayerParams l1_, l2_, out_;
};

std::vector<Matrix*> values(const std::vector<NamedTensor>& tensors);
void zero(const std::vector<NamedTensor>& tensors);

/// Single-sample squashed Gaussian policy output.
struct PolicyOutput {
  Vec2 mean = Vec2::Zero();
  Vec2 log_std = Vec2::Zero();
  Vec2 unit_action = Vec2::Zero();  // tanh(mean + std * eps), in [-1, 1]^2
  Vec2 action = Vec2::Zero();       // unit_action scaled by the bounds
  double log_prob = 0.0;            // density of `action` including the tanh and scale terms
};

// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u);

PolicyOutput policy_from_noise(const Vec2& mean, const Vec2& log_std, const Vec2& eps,
                               const Vec2& bounds);
PolicyOutput policy_sample(const Vec2& mean, const Vec2& log_std, Rng& rng, const Vec2& bounds,
                           bool deterministic = false);

// Batched reparameterized sample. Rows are samples.
struct SquashedBatch {
  Matrix eps;
  Matrix pre_tanh;
  Matrix unit_action;
  Matrix log_prob;  // batch x 1
};
SquashedBatch squash(const Matrix& mean, const Matrix& log_std, const Matrix& eps,
                     const Vec2& bounds);
void squash_backward(const Matrix& log_std, const SquashedBatch& s, const Matrix& d_unit_action,
                     const Matrix& d_log_prob, Matrix& d_mean, Matrix& d_log_std);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long long step = 0;
};

AdamState make_adam_state(const std::vector<Matrix*>& params);
void optimizer_step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads,
                    AdamState& state, const AdamConfig& config);

// target <- tau * online + (1 - tau) * target
void soft_update(const std::vector<Matrix*>& target, const std::vector<Matrix*>& online,
                 double tau);

// Checkpoint text format: a header line, a config hash line, then one
// "tensor <name> <rows> <cols>" line per tensor followed by row-major
// hexfloat values.
void write_tensors(std::ostream& os, std::uint64_t config_hash,
                   const std::vector<NamedTensor>& tensors);
// Reads into tensors of matching names and shapes; throws ValidationError otherwise.
void read_tensors(std::istream& is, std::uint64_t expected_hash,
                  const std::vector<NamedTensor>& tensors);

}  // namespace cogrisk::nn
