#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "netlocal/quantum.hpp"

namespace netlocal::quantum {

namespace {

constexpr double kNegativeClamp = 1e-12;
constexpr double kKrausCutoff = 1e-13;

/// Effects of one party stacked as Kraus rows: p(a) = sum over rows r with
/// outcome_of_row[r] == a of |(K x)_r|^2.
struct KrausStack {
  CMatrix rows;
  std::vector<int> outcome_of_row;
};

KrausStack kraus_stack(const Povm& povm) {
  std::vector<CVector> kets;
  KrausStack stack;
  for (int a = 0; a < povm.n_outcomes(); ++a) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(povm.effects()[static_cast<std::size_t>(a)]);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
      const double lambda = es.eigenvalues()[k];
      if (lambda <= kKrausCutoff) continue;
      kets.push_back(std::sqrt(lambda) * es.eigenvectors().col(k));
      stack.outcome_of_row.push_back(a);
    }
  }
  stack.rows.resize(static_cast<Eigen::Index>(kets.size()), povm.dim());
  for (std::size_t r = 0; r < kets.size(); ++r) stack.rows.row(static_cast<Eigen::Index>(r)) = kets[r].adjoint();
  return stack;
}

/// For a row-major tensor with `dims`, maps each flat index of the permuted
/// tensor (new axis l = old axis perm[l]) to the old flat index.
std::vector<Eigen::Index> permutation_gather(const std::vector<int>& dims, const std::vector<int>& perm) {
  const std::size_t t = dims.size();
  std::vector<Eigen::Index> old_stride(t, 1);
  for (std::size_t k = t - 1; k-- > 0;) old_stride[k] = old_stride[k + 1] * dims[k + 1];
  std::vector<int> new_dims(t);
  for (std::size_t l = 0; l < t; ++l) new_dims[l] = dims[static_cast<std::size_t>(perm[l])];
  const Eigen::Index total = std::accumulate(dims.begin(), dims.end(), Eigen::Index{1}, std::multiplies<>());
  std::vector<Eigen::Index> gather(static_cast<std::size_t>(total));
  std::vector<int> digit(t, 0);
  for (Eigen::Index f = 0; f < total; ++f) {
    Eigen::Index old = 0;
    for (std::size_t l = 0; l < t; ++l) old += digit[l] * old_stride[static_cast<std::size_t>(perm[l])];
    gather[static_cast<std::size_t>(f)] = old;
    for (std::size_t l = t; l-- > 0;) {
      if (++digit[l] < new_dims[l]) break;
      digit[l] = 0;
    }
  }
  return gather;
}

/// Applies each party's Kraus stack to the row index of `x`, whose rows are
/// a row-major tensor with one axis per party.
CMatrix apply_parties(CMatrix x, std::vector<Eigen::Index> axis_dims, const std::vector<KrausStack>& stacks) {
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    const auto& k = stacks[i].rows;
    const Eigen::Index left = std::accumulate(axis_dims.begin(), axis_dims.begin() + static_cast<long>(i), Eigen::Index{1},
                                              std::multiplies<>());
    const Eigen::Index mid = axis_dims[i];
    const Eigen::Index right = std::accumulate(axis_dims.begin() + static_cast<long>(i) + 1, axis_dims.end(),
                                               Eigen::Index{1}, std::multiplies<>());
    const Eigen::Index r = k.rows();
    CMatrix y(left * r * right, x.cols());
    using RowBlock = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (Eigen::Index l = 0; l < left; ++l) {
        Eigen::Map<const RowBlock> in(x.col(c).data() + l * mid * right, mid, right);
        Eigen::Map<RowBlock> out(y.col(c).data() + l * r * right, r, right);
        out.noalias() = k * in;
      }
    }
    x = std::move(y);
    axis_dims[i] = r;
  }
  return x;
}

}  // namespace

Distribution born_distribution(const NetworkConfig& net, const std::vector<SourceState>& states,
                               const std::vector<Povm>& povms, const HilbertWiring& wiring) {
  if (states.size() != net.n_sources())
    throw std::invalid_argument("expected " + std::to_string(net.n_sources()) + " source states, got " +
                                std::to_string(states.size()));
  if (povms.size() != net.n_parties())
    throw std::invalid_argument("expected " + std::to_string(net.n_parties()) + " POVMs, got " +
                                std::to_string(povms.size()));

  std::vector<int> dims;
  bool mixed = false;
  for (const auto& s : states) {
    const auto& d = particle_dims(s);
    dims.insert(dims.end(), d.begin(), d.end());
    mixed = mixed || std::holds_alternative<DensityMatrix>(s);
  }
  if (wiring.size() != dims.size())
    throw std::invalid_argument("wiring has " + std::to_string(wiring.size()) + " entries, but there are " +
                                std::to_string(dims.size()) + " particles");

  // Parties take consecutive slots until the product of their dimensions
  // reaches the dimension their POVM acts on.
  std::vector<Eigen::Index> party_dims;
  std::vector<KrausStack> stacks;
  std::size_t slot = 0;
  for (std::size_t i = 0; i < net.n_parties(); ++i) {
    const auto& party = net.parties()[i];
    Eigen::Index d = 1;
    while (d < povms[i].dim() && slot < dims.size()) d *= dims[static_cast<std::size_t>(wiring.order()[slot++])];
    if (povms[i].dim() != d)
      throw std::invalid_argument("party '" + party.name + "' receives dimension " + std::to_string(d) +
                                  " but its POVM acts on dimension " + std::to_string(povms[i].dim()));
    if (povms[i].n_outcomes() != party.n_outcomes)
      throw std::invalid_argument("party '" + party.name + "' declares " + std::to_string(party.n_outcomes) +
                                  " outcomes but its POVM has " + std::to_string(povms[i].n_outcomes()));
    party_dims.push_back(d);
    stacks.push_back(kraus_stack(povms[i]));
  }
  if (slot != dims.size())
    throw std::invalid_argument(std::to_string(dims.size() - slot) + " particles are not measured by any party");

  const auto gather = permutation_gather(dims, wiring.order());
  const auto total = static_cast<Eigen::Index>(gather.size());

  Eigen::VectorXd weights;
  if (!mixed) {
    CVector psi = CVector::Ones(1);
    for (const auto& s : states) psi = Eigen::kroneckerProduct(psi, std::get<StateVector>(s).amplitudes()).eval();
    CMatrix permuted(total, 1);
    for (Eigen::Index f = 0; f < total; ++f) permuted(f, 0) = psi[gather[static_cast<std::size_t>(f)]];
    weights = apply_parties(std::move(permuted), party_dims, stacks).col(0).cwiseAbs2();
  } else {
    CMatrix rho = CMatrix::Ones(1, 1);
    for (const auto& s : states) {
      const CMatrix m = std::holds_alternative<DensityMatrix>(s)
                            ? std::get<DensityMatrix>(s).matrix()
                            : DensityMatrix::from_pure(std::get<StateVector>(s)).matrix();
      rho = Eigen::kroneckerProduct(rho, m).eval();
    }
    CMatrix permuted(total, total);
    for (Eigen::Index c = 0; c < total; ++c)
      for (Eigen::Index r = 0; r < total; ++r)
        permuted(r, c) = rho(gather[static_cast<std::size_t>(r)], gather[static_cast<std::size_t>(c)]);
    // K rho K^dagger: apply K to rows, then to the rows of the adjoint.
    CMatrix half = apply_parties(std::move(permuted), party_dims, stacks);
    CMatrix full = apply_parties(half.adjoint(), party_dims, stacks);
    weights = full.diagonal().real();
  }

  // Sum weights of Kraus rows into outcome tuples.
  const OutcomeIndexer indexer(net.outcome_shape());
  std::vector<double> probs(indexer.total(), 0.0);
  std::vector<Eigen::Index> rows_per_party;
  for (const auto& s : stacks) rows_per_party.push_back(s.rows.rows());
  std::vector<int> digit(stacks.size(), 0), tuple(stacks.size(), 0);
  for (Eigen::Index f = 0; f < weights.size(); ++f) {
    for (std::size_t i = 0; i < stacks.size(); ++i) tuple[i] = stacks[i].outcome_of_row[static_cast<std::size_t>(digit[i])];
    probs[indexer.index(tuple)] += weights[f];
    for (std::size_t i = stacks.size(); i-- > 0;) {
      if (++digit[i] < rows_per_party[i]) break;
      digit[i] = 0;
    }
  }
  for (auto& p : probs) {
    if (p < -kNegativeClamp) throw std::runtime_error("Born rule produced a negative probability");
    p = std::max(p, 0.0);
  }
  return Distribution(indexer, std::move(probs));
}

Distribution coarse_grain(const Distribution& dist, const std::vector<std::vector<int>>& merges) {
  const auto& shape = dist.indexer().shape();
  if (merges.size() != shape.size()) throw std::invalid_argument("need one merge map per party");
  std::vector<int> new_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const auto& m = merges[i];
    if (static_cast<int>(m.size()) != shape[i])
      throw std::invalid_argument("merge map for party " + std::to_string(i) + " has wrong length");
    const int k = m.empty() ? 0 : *std::max_element(m.begin(), m.end()) + 1;
    std::vector<bool> hit(static_cast<std::size_t>(std::max(k, 0)), false);
    for (int v : m) {
      if (v < 0) throw std::out_of_range("merge map for party " + std::to_string(i) + " has a negative outcome");
      hit[static_cast<std::size_t>(v)] = true;
    }
    if (std::find(hit.begin(), hit.end(), false) != hit.end())
      throw std::invalid_argument("merge map for party " + std::to_string(i) + " is not onto 0.." + std::to_string(k - 1));
    new_shape.push_back(k);
  }
  const OutcomeIndexer out_indexer(new_shape);
  std::vector<double> probs(out_indexer.total(), 0.0);
  std::vector<int> mapped(shape.size());
  for (std::size_t f = 0; f < dist.size(); ++f) {
    const auto t = dist.indexer().tuple(f);
    for (std::size_t i = 0; i < t.size(); ++i) mapped[i] = merges[i][static_cast<std::size_t>(t[i])];
    probs[out_indexer.index(mapped)] += dist[f];
  }
  return Distribution(out_indexer, std::move(probs));
}

}  // namespace netlocal::quantum
