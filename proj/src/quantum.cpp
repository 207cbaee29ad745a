#include "netlocal/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace netlocal::quantum {

namespace {

int product(const std::vector<int>& dims) {
  return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
}

void require_dims(const std::vector<int>& dims, Eigen::Index size, const char* what) {
  if (dims.empty()) throw std::invalid_argument(std::string(what) + ": no subsystem dimensions");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument(std::string(what) + ": non-positive subsystem dimension");
  if (product(dims) != size) throw std::invalid_argument(std::string(what) + ": dimensions do not match size");
}

double min_hermitian_eigenvalue(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

StateVector::StateVector(CVector amplitudes, std::vector<int> dims)
    : amplitudes_(std::move(amplitudes)), dims_(std::move(dims)) {
  require_dims(dims_, amplitudes_.size(), "state vector");
  if (std::abs(amplitudes_.norm() - 1.0) > kQuantumTolerance)
    throw std::invalid_argument("state vector is not normalized");
}

DensityMatrix::DensityMatrix(CMatrix matrix, std::vector<int> dims) : matrix_(std::move(matrix)), dims_(std::move(dims)) {
  if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("density matrix is not square");
  require_dims(dims_, matrix_.rows(), "density matrix");
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > kQuantumTolerance)
    throw std::invalid_argument("density matrix is not Hermitian");
  if (std::abs(matrix_.trace() - cplx(1.0)) > kQuantumTolerance)
    throw std::invalid_argument("density matrix does not have unit trace");
  if (min_hermitian_eigenvalue(matrix_) < -kQuantumTolerance)
    throw std::invalid_argument("density matrix is not positive semidefinite");
}

DensityMatrix DensityMatrix::from_pure(const StateVector& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint(), psi.dims());
}

const std::vector<int>& particle_dims(const SourceState& state) {
  return std::visit([](const auto& s) -> const std::vector<int>& { return s.dims(); }, state);
}

Povm::Povm(std::vector<CMatrix> effects) : effects_(std::move(effects)) {
  if (effects_.empty()) throw std::invalid_argument("POVM has no effects");
  const auto d = effects_.front().rows();
  CMatrix total = CMatrix::Zero(d, d);
  for (std::size_t a = 0; a < effects_.size(); ++a) {
    const auto& m = effects_[a];
    if (m.rows() != d || m.cols() != d) throw std::invalid_argument("POVM effects have inconsistent shapes");
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kQuantumTolerance)
      throw std::invalid_argument("POVM effect " + std::to_string(a) + " is not Hermitian");
    if (min_hermitian_eigenvalue(m) < -kQuantumTolerance)
      throw std::invalid_argument("POVM effect " + std::to_string(a) + " is not positive semidefinite");
    total += m;
  }
  if ((total - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() > kQuantumTolerance)
    throw std::invalid_argument("POVM effects do not sum to the identity");
}

Povm Povm::projective(const CMatrix& basis) {
  std::vector<CMatrix> effects;
  for (Eigen::Index k = 0; k < basis.cols(); ++k) effects.push_back(basis.col(k) * basis.col(k).adjoint());
  return Povm(std::move(effects));
}

HilbertWiring::HilbertWiring(std::vector<int> order) : order_(std::move(order)) {
  std::vector<int> sorted = order_;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != static_cast<int>(i)) throw std::invalid_argument("wiring is not a permutation of 0..T-1");
}

HilbertWiring HilbertWiring::inverse() const {
  std::vector<int> inv(order_.size());
  for (std::size_t l = 0; l < order_.size(); ++l) inv[static_cast<std::size_t>(order_[l])] = static_cast<int>(l);
  return HilbertWiring(std::move(inv));
}

HilbertWiring parse_wiring(std::string_view text) {
  std::vector<int> order;
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw std::invalid_argument("wiring entry '" + tok + "' is not an integer");
    order.push_back(v);
  }
  return HilbertWiring(std::move(order));
}

HilbertWiring ring_wiring(int n_sources) {
  const int t = 2 * n_sources;
  std::vector<int> order(static_cast<std::size_t>(t));
  for (int l = 0; l < t; ++l) order[static_cast<std::size_t>(l)] = (l + t - 1) % t;
  return HilbertWiring(std::move(order));
}

namespace {

/// Particles each party takes from each of its sources: one per receiving
/// party, with any surplus going to the last receiver.
std::vector<std::vector<int>> particle_shares(const NetworkConfig& config, const std::vector<int>& particles_per_source) {
  if (particles_per_source.size() != config.n_sources())
    throw std::invalid_argument("need a particle count for every source");
  const auto indices = config.party_source_indices();
  std::vector<int> receivers(config.n_sources(), 0), last(config.n_sources(), -1);
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (auto s : indices[i]) {
      ++receivers[s];
      last[s] = static_cast<int>(i);
    }
  std::vector<std::vector<int>> shares(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (auto s : indices[i]) {
      if (particles_per_source[s] < receivers[s])
        throw std::invalid_argument("source '" + config.sources()[s] + "' has fewer particles than receiving parties");
      shares[i].push_back(last[s] == static_cast<int>(i) ? particles_per_source[s] - receivers[s] + 1 : 1);
    }
  return shares;
}

}  // namespace

HilbertWiring auto_wiring(const NetworkConfig& config, const std::vector<int>& particles_per_source) {
  const auto shares = particle_shares(config, particles_per_source);
  std::vector<int> first(particles_per_source.size(), 0);
  std::partial_sum(particles_per_source.begin(), particles_per_source.end() - 1, first.begin() + 1);
  std::vector<int> used(particles_per_source.size(), 0);
  std::vector<int> order;
  const auto indices = config.party_source_indices();
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (std::size_t k = 0; k < indices[i].size(); ++k) {
      const auto s = indices[i][k];
      for (int c = 0; c < shares[i][k]; ++c) order.push_back(first[s] + used[s]++);
    }
  return HilbertWiring(std::move(order));
}

bool wiring_matches_config(const NetworkConfig& config, const std::vector<int>& particles_per_source,
                           const HilbertWiring& wiring) {
  std::vector<int> owner;
  for (std::size_t s = 0; s < particles_per_source.size(); ++s) owner.insert(owner.end(), particles_per_source[s], static_cast<int>(s));
  if (owner.size() != wiring.size()) return false;
  std::vector<std::vector<int>> shares;
  try {
    shares = particle_shares(config, particles_per_source);
  } catch (const std::invalid_argument&) {
    return false;
  }
  const auto indices = config.party_source_indices();
  std::size_t slot = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::vector<int> want, got;
    for (std::size_t k = 0; k < indices[i].size(); ++k)
      for (int c = 0; c < shares[i][k]; ++c) {
        want.push_back(static_cast<int>(indices[i][k]));
        got.push_back(owner[static_cast<std::size_t>(wiring.order()[slot++])]);
      }
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want != got) return false;
  }
  return true;
}

StateVector bell_state(BellKind kind) {
  const double r = std::numbers::sqrt2 / 2.0;
  CVector amp = CVector::Zero(4);
  switch (kind) {
    case BellKind::PhiPlus: amp << r, 0, 0, r; break;
    case BellKind::PhiMinus: amp << r, 0, 0, -r; break;
    case BellKind::PsiPlus: amp << 0, r, r, 0; break;
    case BellKind::PsiMinus: amp << 0, r, -r, 0; break;
  }
  return StateVector(std::move(amp), {2, 2});
}

StateVector rotated_state(double theta, int family) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw std::invalid_argument("theta must lie in [0, pi]");
  if (family != 1 && family != 2) throw std::invalid_argument("rotated state family must be 1 or 2");
  const auto phi = bell_state(family == 1 ? BellKind::PhiPlus : BellKind::PhiMinus);
  const auto psi = bell_state(family == 1 ? BellKind::PsiPlus : BellKind::PsiMinus);
  CVector amp = std::cos(theta / 2) * phi.amplitudes() + cplx(0.0, std::sin(theta / 2)) * psi.amplitudes();
  amp.normalize();
  return StateVector(std::move(amp), {2, 2});
}

DensityMatrix werner(const StateVector& pure, double visibility) {
  if (pure.dims() != std::vector<int>{2, 2}) throw std::invalid_argument("Werner state needs a two-qubit input");
  if (!(visibility >= 0.0 && visibility <= 1.0)) throw std::invalid_argument("visibility must lie in [0, 1]");
  CMatrix rho = visibility * (pure.amplitudes() * pure.amplitudes().adjoint());
  rho += (1.0 - visibility) / 4.0 * CMatrix::Identity(4, 4);
  return DensityMatrix(std::move(rho), {2, 2});
}

CVector bloch_ket(const Eigen::Vector3d& m) {
  const Eigen::Vector3d n = m.normalized();
  CVector ket(2);
  const double a = std::sqrt(std::max(0.0, (1.0 + n.z()) / 2.0));
  if (a < 1e-12) {
    ket << 0.0, 1.0;
  } else {
    ket << a, cplx(n.x(), n.y()) / (2.0 * a);
  }
  return ket;
}

std::vector<Eigen::Vector3d> tetrahedron_vectors() {
  const double s = 1.0 / std::sqrt(3.0);
  return {Eigen::Vector3d(1, 1, 1) * s, Eigen::Vector3d(1, -1, -1) * s, Eigen::Vector3d(-1, 1, -1) * s,
          Eigen::Vector3d(-1, -1, 1) * s};
}

Povm rgb4_povm(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("u must lie in [0, 1]");
  const double v = std::sqrt(std::max(0.0, 1.0 - u * u));
  CMatrix basis = CMatrix::Zero(4, 4);
  basis(0, 0) = 1.0;
  basis(1, 1) = u;
  basis(2, 1) = v;
  basis(1, 2) = v;
  basis(2, 2) = -u;
  basis(3, 3) = 1.0;
  return Povm::projective(basis);
}

Povm tetra_joint_measurement(double mu) {
  if (!(mu >= 0.0 && mu <= std::numbers::pi / 2)) throw std::invalid_argument("mu must lie in [0, pi/2]");
  const cplx phase = std::polar(1.0, mu);
  const double norm = 2.0 * std::numbers::sqrt2;
  const cplx c_plus = (std::sqrt(3.0) + phase) / norm;
  const cplx c_minus = (std::sqrt(3.0) - phase) / norm;
  CMatrix basis(4, 4);
  const auto tetra = tetrahedron_vectors();
  for (int b = 0; b < 4; ++b) {
    const CVector up = bloch_ket(tetra[b]);
    const CVector down = bloch_ket(-tetra[b]);
    basis.col(b) = c_plus * Eigen::kroneckerProduct(up, down).eval() + c_minus * Eigen::kroneckerProduct(down, up).eval();
  }
  return Povm::projective(basis);
}

Povm computational_basis_povm(int n_qubits) {
  if (n_qubits < 1) throw std::invalid_argument("need at least one qubit");
  const Eigen::Index d = Eigen::Index{1} << n_qubits;
  return Povm::projective(CMatrix::Identity(d, d));
}

}  // namespace netlocal::quantum
