#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "netlocal/local_model.hpp"

namespace netlocal::localmodel {

namespace {

// Samples per forward/backward chunk; small enough for the activations to stay in cache.
constexpr std::size_t kChunk = 1024;
// Up to this many samples the forward caches of all chunks are kept for the
// backward pass; larger samples recompute the forward pass chunk by chunk.
constexpr std::size_t kKeepForward = 1 << 16;

Matrix gather_inputs(const HiddenSample& sample, const std::vector<std::size_t>& sources, std::size_t begin,
                     std::size_t count) {
  Matrix x(static_cast<Eigen::Index>(sources.size()), static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < sources.size(); ++j)
    x.row(static_cast<Eigen::Index>(j)) =
        sample.values().col(static_cast<Eigen::Index>(sources[j])).segment(static_cast<Eigen::Index>(begin),
                                                                          static_cast<Eigen::Index>(count)).transpose();
  return x;
}

/// Column-wise Kronecker (Khatri-Rao) product: row (l, a) -> l * rows(b) + a.
Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index l = 0; l < a.rows(); ++l)
    out.middleRows(l * b.rows(), b.rows()) = b.array().rowwise() * a.row(l).array();
  return out;
}

struct ChunkForward {
  std::vector<ResponseBlock::Cache> caches;
  std::vector<const Matrix*> probs;
};

void forward_chunk(const LocalModelNet& net, const HiddenSample& sample, std::size_t begin, std::size_t count,
                   ChunkForward& fw) {
  const auto& blocks = net.blocks();
  fw.caches.resize(blocks.size());
  fw.probs.resize(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i)
    fw.probs[i] = &blocks[i].forward(gather_inputs(sample, net.inputs()[i], begin, count), fw.caches[i]);
}

/// Adds the chunk's sum over samples of the joint outcome tensor into q.
void accumulate_joint(const ChunkForward& fw, std::vector<double>& q) {
  const std::size_t n = fw.probs.size();
  Matrix prefix = Matrix::Ones(1, fw.probs[0]->cols());
  for (std::size_t i = 0; i + 1 < n; ++i) prefix = khatri_rao(prefix, *fw.probs[i]);
  // q viewed as (L x o_last) row-major is prefix * P_last^T
  const Matrix& last = *fw.probs[n - 1];
  const Matrix block = prefix * last.transpose();
  for (Eigen::Index l = 0; l < block.rows(); ++l)
    for (Eigen::Index a = 0; a < block.cols(); ++a) q[static_cast<std::size_t>(l * block.cols() + a)] += block(l, a);
}

/// dLoss/dP_i for every party, given dLoss/dq (already scaled by 1/N).
std::vector<Matrix> joint_backward(const ChunkForward& fw, const std::vector<double>& dq) {
  const std::size_t n = fw.probs.size();
  const Eigen::Index cols = fw.probs[0]->cols();
  std::vector<Matrix> prefix(n), suffix(n);
  prefix[0] = Matrix::Ones(1, cols);
  for (std::size_t i = 1; i < n; ++i) prefix[i] = khatri_rao(prefix[i - 1], *fw.probs[i - 1]);
  suffix[n - 1] = Matrix::Ones(1, cols);
  for (std::size_t i = n - 1; i-- > 0;) suffix[i] = khatri_rao(*fw.probs[i + 1], suffix[i + 1]);

  std::vector<Matrix> d_probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index o = fw.probs[i]->rows();
    const Eigen::Index left = prefix[i].rows();
    const Eigen::Index right = suffix[i].rows();
    Matrix dp = Matrix::Zero(o, cols);
    if (left <= right) {
      // T[(l, a), k] = sum_r G[(l, a), r] S[r, k]; dp[a, k] = sum_l P[l, k] T[(l, a), k]
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(dq.data(), left * o, right);
      const Matrix t = g * suffix[i];
      for (Eigen::Index l = 0; l < left; ++l)
        dp.array() += t.middleRows(l * o, o).array().rowwise() * prefix[i].row(l).array();
    } else {
      // U[(a, r), k] = sum_l G[l, (a, r)] P[l, k]; dp[a, k] = sum_r U[(a, r), k] S[r, k]
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(dq.data(), left, o * right);
      const Matrix u = g.transpose() * prefix[i];
      for (Eigen::Index a = 0; a < o; ++a)
        dp.row(a) = (u.middleRows(a * right, right).array() * suffix[i].array()).colwise().sum();
    }
    d_probs[i] = std::move(dp);
  }
  return d_probs;
}

std::vector<double> loss_gradient_wrt_estimate(std::span<const double> target, std::span<const double> q,
                                               LossKind kind, double loss_value) {
  std::vector<double> g(q.size(), 0.0);
  if (kind == LossKind::KL) {
    for (std::size_t i = 0; i < q.size(); ++i)
      if (target[i] > 0.0 && q[i] > kKlClamp) g[i] = -target[i] / q[i];
  } else if (loss_value > 0.0) {
    for (std::size_t i = 0; i < q.size(); ++i) g[i] = (q[i] - target[i]) / loss_value;
  }
  return g;
}

double raw_loss(std::span<const double> target, std::span<const double> q, LossKind kind) {
  return kind == LossKind::KL ? kl_divergence(target, q) : euclidean_distance(target, q);
}

}  // namespace

LocalModelNet::LocalModelNet(NetworkConfig config, std::vector<ResponseBlock> blocks)
    : config_(std::move(config)), blocks_(std::move(blocks)), inputs_(config_.party_source_indices()) {
  if (blocks_.size() != config_.n_parties()) throw std::invalid_argument("need one response block per party");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& party = config_.parties()[i];
    if (blocks_[i].input_dim() != static_cast<int>(party.sources.size()))
      throw std::invalid_argument("block for '" + party.name + "' has the wrong input dimension");
    if (blocks_[i].output_dim() != party.n_outcomes)
      throw std::invalid_argument("block for '" + party.name + "' has the wrong output dimension");
  }
}

std::size_t LocalModelNet::n_parameters() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.n_parameters();
  return n;
}

namespace {
template <typename LayerFn>
void for_each_layer(const NetGradient& layers, LayerFn&& fn) {
  for (const auto& block : layers)
    for (const auto& layer : block) fn(layer);
}
}  // namespace

std::vector<double> LocalModelNet::flatten(const NetGradient& grad) {
  std::vector<double> flat;
  for_each_layer(grad, [&](const Layer& layer) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat.push_back(layer.weight(r, c));
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  });
  return flat;
}

std::vector<double> LocalModelNet::flat_parameters() const {
  NetGradient layers;
  for (const auto& b : blocks_) layers.push_back(b.layers());
  return flatten(layers);
}

void LocalModelNet::set_flat_parameters(const std::vector<double>& flat) {
  if (flat.size() != n_parameters()) throw std::invalid_argument("flat parameter vector has the wrong length");
  std::size_t k = 0;
  for (auto& block : blocks_) {
    for (auto& layer : block.layers()) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = flat[k++];
    }
  }
}

NetGradient LocalModelNet::zero_gradient() const {
  NetGradient grad;
  for (const auto& b : blocks_) {
    std::vector<Layer> layers;
    for (const auto& layer : b.layers())
      layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
    grad.push_back(std::move(layers));
  }
  return grad;
}

std::size_t LocalModelNet::block_index(std::string_view party) const {
  const auto& parties = config_.parties();
  auto it = std::find_if(parties.begin(), parties.end(), [&](const PartySpec& p) { return p.name == party; });
  if (it == parties.end()) throw std::invalid_argument("unknown party '" + std::string(party) + "'");
  return static_cast<std::size_t>(it - parties.begin());
}

HiddenSample::HiddenSample(Matrix values) : values_(std::move(values)) {
  if ((values_.array() < 0.0).any() || (values_.array() >= 1.0).any())
    throw std::invalid_argument("hidden variables must lie in [0, 1)");
}

HiddenSample HiddenSample::draw(std::size_t n_samples, std::size_t n_sources, Rng& rng) {
  HiddenSample s;
  s.values_.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(n_sources));
  // row by row so a prefix of a larger draw equals a smaller draw
  for (Eigen::Index r = 0; r < s.values_.rows(); ++r)
    for (Eigen::Index c = 0; c < s.values_.cols(); ++c) s.values_(r, c) = uniform01(rng);
  return s;
}

HiddenSample HiddenSample::slice(std::size_t begin, std::size_t count) const {
  HiddenSample s;
  s.values_ = values_.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return s;
}

LocalModelNet init_net(const NetworkConfig& config, int width, int depth, std::uint64_t seed) {
  if (width < 1 || depth < 1) throw std::invalid_argument("width and depth must be at least 1");
  Rng rng(seed);
  std::vector<ResponseBlock> blocks;
  for (const auto& party : config.parties()) {
    ResponseBlock block(static_cast<int>(party.sources.size()), width, depth, party.n_outcomes);
    auto& layers = block.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& w = layers[l].weight;
      const double fan_in = static_cast<double>(w.cols());
      const bool output = l + 1 == layers.size();
      const double bound = output ? 1.0 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
    }
    blocks.push_back(std::move(block));
  }
  return LocalModelNet(config, std::move(blocks));
}

namespace {
std::vector<double> empirical_vector(const LocalModelNet& net, const HiddenSample& sample) {
  if (sample.n_sources() != net.config().n_sources())
    throw std::invalid_argument("hidden sample has " + std::to_string(sample.n_sources()) + " columns, network has " +
                                std::to_string(net.config().n_sources()) + " sources");
  if (sample.size() == 0) throw std::invalid_argument("hidden sample is empty");
  std::vector<double> q(net.config().n_joint_outcomes(), 0.0);
  ChunkForward fw;
  for (std::size_t begin = 0; begin < sample.size(); begin += kChunk) {
    forward_chunk(net, sample, begin, std::min(kChunk, sample.size() - begin), fw);
    accumulate_joint(fw, q);
  }
  const double inv = 1.0 / static_cast<double>(sample.size());
  for (auto& v : q) v *= inv;
  return q;
}
}  // namespace

Distribution forward_empirical(const LocalModelNet& net, const HiddenSample& sample) {
  return Distribution(net.indexer(), empirical_vector(net, sample));
}

std::string_view to_string(LossKind kind) { return kind == LossKind::KL ? "kl" : "euclid"; }

LossKind parse_loss_kind(std::string_view text) {
  if (text == "kl" || text == "KL") return LossKind::KL;
  if (text == "euclid" || text == "euclidean") return LossKind::Euclidean;
  throw std::invalid_argument("unknown loss '" + std::string(text) + "' (expected kl or euclid)");
}

double loss(const Distribution& target, const Distribution& estimate, LossKind kind) {
  return kind == LossKind::KL ? kl_divergence(target, estimate) : euclidean_distance(target, estimate);
}

LossAndGradient loss_and_gradient(const LocalModelNet& net, const Distribution& target, const HiddenSample& sample,
                                  LossKind kind) {
  if (!(target.indexer() == net.indexer())) throw std::invalid_argument("target shape does not match the network");
  if (sample.n_sources() != net.config().n_sources())
    throw std::invalid_argument("hidden sample column count does not match the number of sources");
  const std::size_t n = sample.size();
  if (n == 0) throw std::invalid_argument("hidden sample is empty");
  const double inv = 1.0 / static_cast<double>(n);

  LossAndGradient out;
  out.gradient = net.zero_gradient();
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  const bool keep = n <= kKeepForward;
  std::vector<ChunkForward> fws(keep ? n_chunks : 1);
  out.estimate.assign(target.size(), 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    auto& fw = fws[keep ? c : 0];
    forward_chunk(net, sample, c * kChunk, std::min(kChunk, n - c * kChunk), fw);
    accumulate_joint(fw, out.estimate);
  }
  for (auto& v : out.estimate) v *= inv;
  out.loss = raw_loss(target.probs(), out.estimate, kind);
  auto dq = loss_gradient_wrt_estimate(target.probs(), out.estimate, kind, out.loss);
  for (auto& v : dq) v *= inv;

  for (std::size_t c = 0; c < n_chunks; ++c) {
    auto& fw = fws[keep ? c : 0];
    if (!keep) forward_chunk(net, sample, c * kChunk, std::min(kChunk, n - c * kChunk), fw);
    const auto d_probs = joint_backward(fw, dq);
    for (std::size_t i = 0; i < net.blocks().size(); ++i) net.blocks()[i].backward(fw.caches[i], d_probs[i], out.gradient[i]);
  }
  return out;
}

NetGradient gradient(const LocalModelNet& net, const Distribution& target, const HiddenSample& sample, LossKind kind) {
  return loss_and_gradient(net, target, sample, kind).gradient;
}

StrategyGrid export_strategies(const LocalModelNet& net, std::string_view party, int grid_resolution) {
  if (grid_resolution < 1) throw std::invalid_argument("grid resolution must be positive");
  const std::size_t i = net.block_index(party);
  const auto& block = net.blocks()[i];
  if (block.input_dim() != 2)
    throw std::invalid_argument("party '" + std::string(party) + "' has " + std::to_string(block.input_dim()) +
                                " sources; strategy export needs exactly 2");
  StrategyGrid grid;
  grid.party = std::string(party);
  grid.resolution = grid_resolution;
  grid.n_outcomes = block.output_dim();
  const auto points = static_cast<Eigen::Index>(grid_resolution) * grid_resolution;
  Matrix x(2, points);
  for (int a = 0; a < grid_resolution; ++a) {
    for (int b = 0; b < grid_resolution; ++b) {
      const double la = static_cast<double>(a) / grid_resolution;
      const double lb = static_cast<double>(b) / grid_resolution;
      x(0, a * grid_resolution + b) = la;
      x(1, a * grid_resolution + b) = lb;
      grid.lambda_a.push_back(la);
      grid.lambda_b.push_back(lb);
    }
  }
  grid.probs = block.probabilities(x).transpose();
  return grid;
}

std::string strategy_csv(const StrategyGrid& grid) {
  std::ostringstream out;
  out << "lambda_a,lambda_b";
  for (int a = 0; a < grid.n_outcomes; ++a) out << ",p_" << a;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < grid.probs.rows(); ++r) {
    out << grid.lambda_a[static_cast<std::size_t>(r)] << ',' << grid.lambda_b[static_cast<std::size_t>(r)];
    for (Eigen::Index a = 0; a < grid.probs.cols(); ++a) out << ',' << grid.probs(r, a);
    out << '\n';
  }
  return out.str();
}

}  // namespace netlocal::localmodel
