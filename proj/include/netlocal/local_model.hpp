#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "netlocal/topology.hpp"

namespace netlocal::localmodel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Feedforward response function of one party: ReLU hidden layers and a
/// softmax output, mapping its hidden variables to outcome probabilities.
class ResponseBlock {
 public:
  ResponseBlock() = default;
  ResponseBlock(int input_dim, int width, int depth, int output_dim);

  int input_dim() const noexcept { return input_dim_; }
  int width() const noexcept { return width_; }
  int depth() const noexcept { return depth_; }
  int output_dim() const noexcept { return output_dim_; }

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t n_parameters() const;

  /// Per-layer activations kept for the backward pass. `activations[0]` is
  /// the input, the last entry the softmax output.
  struct Cache {
    std::vector<Matrix> activations;
  };

  /// Columns of `inputs` are samples; returns output_dim x N probabilities.
  Matrix probabilities(const Matrix& inputs) const;
  const Matrix& forward(const Matrix& inputs, Cache& cache) const;
  /// Accumulates parameter gradients into `grad` given dLoss/dProbabilities.
  void backward(const Cache& cache, const Matrix& d_probs, std::vector<Layer>& grad) const;

 private:
  int input_dim_ = 0;
  int width_ = 0;
  int depth_ = 0;
  int output_dim_ = 0;
  std::vector<Layer> layers_;
};

/// Per-block, per-layer gradients with the same shapes as the parameters.
using NetGradient = std::vector<std::vector<Layer>>;

/// One response block per party; each block only sees the hidden variables
/// of that party's sources.
class LocalModelNet {
 public:
  LocalModelNet() = default;
  LocalModelNet(NetworkConfig config, std::vector<ResponseBlock> blocks);

  const NetworkConfig& config() const noexcept { return config_; }
  const std::vector<ResponseBlock>& blocks() const noexcept { return blocks_; }
  std::vector<ResponseBlock>& blocks() noexcept { return blocks_; }
  const std::vector<std::vector<std::size_t>>& inputs() const noexcept { return inputs_; }
  int width() const { return blocks_.front().width(); }
  int depth() const { return blocks_.front().depth(); }
  OutcomeIndexer indexer() const { return OutcomeIndexer(config_.outcome_shape()); }

  std::size_t n_parameters() const;
  /// All parameters in block order, then layer order, weights row-major then bias.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(const std::vector<double>& flat);
  NetGradient zero_gradient() const;
  static std::vector<double> flatten(const NetGradient& grad);

  std::size_t block_index(std::string_view party) const;

 private:
  NetworkConfig config_;
  std::vector<ResponseBlock> blocks_;
  std::vector<std::vector<std::size_t>> inputs_;
};

/// Hidden-variable draws: N rows, one column per source, iid uniform on [0, 1).
class HiddenSample {
 public:
  HiddenSample() = default;
  explicit HiddenSample(Matrix values);
  static HiddenSample draw(std::size_t n_samples, std::size_t n_sources, Rng& rng);

  const Matrix& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t n_sources() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  /// Rows [begin, begin + count) as a new sample.
  HiddenSample slice(std::size_t begin, std::size_t count) const;

 private:
  Matrix values_;
};

/// He-uniform weights for hidden layers, 1/sqrt(fan_in) uniform for the
/// output layer, zero biases. Deterministic in `seed`.
LocalModelNet init_net(const NetworkConfig& config, int width, int depth, std::uint64_t seed);

/// Empirical distribution: the sample mean of the product of the
/// parties' response probabilities.
Distribution forward_empirical(const LocalModelNet& net, const HiddenSample& sample);

enum class LossKind { KL, Euclidean };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

/// KL(target || estimate) or the Euclidean distance.
double loss(const Distribution& target, const Distribution& estimate, LossKind kind);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> estimate;
  NetGradient gradient;
};

/// Loss of the empirical distribution on a fixed sample and its exact
/// gradient with respect to every block parameter.
LossAndGradient loss_and_gradient(const LocalModelNet& net, const Distribution& target, const HiddenSample& sample,
                                  LossKind kind);
NetGradient gradient(const LocalModelNet& net, const Distribution& target, const HiddenSample& sample, LossKind kind);

/// p(a | lambda_a, lambda_b) of a two-source party on a res x res lattice of
/// [0, 1)^2 (lambda = k / res).
struct StrategyGrid {
  std::string party;
  int resolution = 0;
  int n_outcomes = 0;
  std::vector<double> lambda_a;
  std::vector<double> lambda_b;
  Matrix probs;  // rows are lattice points
};

StrategyGrid export_strategies(const LocalModelNet& net, std::string_view party, int grid_resolution);
/// Header `lambda_a,lambda_b,p_0,...,p_{o-1}`.
std::string strategy_csv(const StrategyGrid& grid);

}  // namespace netlocal::localmodel
