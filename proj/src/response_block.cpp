#include <cmath>
#include <stdexcept>

#include "netlocal/local_model.hpp"

namespace netlocal::localmodel {

ResponseBlock::ResponseBlock(int input_dim, int width, int depth, int output_dim)
    : input_dim_(input_dim), width_(width), depth_(depth), output_dim_(output_dim) {
  if (input_dim < 1 || width < 1 || depth < 1 || output_dim < 1)
    throw std::invalid_argument("response block dimensions must be positive");
  int fan_in = input_dim;
  for (int l = 0; l < depth; ++l) {
    layers_.push_back({Matrix::Zero(width, fan_in), Vector::Zero(width)});
    fan_in = width;
  }
  layers_.push_back({Matrix::Zero(output_dim, fan_in), Vector::Zero(output_dim)});
}

std::size_t ResponseBlock::n_parameters() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

const Matrix& ResponseBlock::forward(const Matrix& inputs, Cache& cache) const {
  if (inputs.rows() != input_dim_) throw std::invalid_argument("response block input has wrong dimension");
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0] = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Matrix& out = cache.activations[l + 1];
    out.noalias() = layer.weight * cache.activations[l];
    out.colwise() += layer.bias;
    if (l + 1 < layers_.size()) {
      out = out.cwiseMax(0.0);
    } else {
      // column-wise softmax
      const Eigen::RowVectorXd shift = out.colwise().maxCoeff();
      out.rowwise() -= shift;
      out = out.array().exp();
      const Eigen::RowVectorXd norm = out.colwise().sum();
      out.array().rowwise() /= norm.array();
    }
  }
  return cache.activations.back();
}

Matrix ResponseBlock::probabilities(const Matrix& inputs) const {
  Cache cache;
  return forward(inputs, cache);
}

void ResponseBlock::backward(const Cache& cache, const Matrix& d_probs, std::vector<Layer>& grad) const {
  const Matrix& probs = cache.activations.back();
  // softmax: dz = p * (dp - <dp, p>)
  const Eigen::RowVectorXd inner = (d_probs.array() * probs.array()).colwise().sum();
  Matrix dz = probs.array() * (d_probs.array().rowwise() - inner.array());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Matrix& input = cache.activations[l];
    grad[l].weight.noalias() += dz * input.transpose();
    grad[l].bias += dz.rowwise().sum();
    if (l == 0) break;
    Matrix da = layers_[l].weight.transpose() * dz;
    dz = (input.array() > 0.0).select(da, 0.0);
  }
}

}  // namespace netlocal::localmodel
