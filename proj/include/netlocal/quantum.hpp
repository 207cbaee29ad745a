#pragma once

#include <complex>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "netlocal/topology.hpp"

namespace netlocal::quantum {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kQuantumTolerance = 1e-10;

/// Pure state over particles with the given local dimensions.
class StateVector {
 public:
  StateVector(CVector amplitudes, std::vector<int> dims);

  const CVector& amplitudes() const noexcept { return amplitudes_; }
  const std::vector<int>& dims() const noexcept { return dims_; }
  cplx operator[](Eigen::Index i) const { return amplitudes_[i]; }

 private:
  CVector amplitudes_;
  std::vector<int> dims_;
};

class DensityMatrix {
 public:
  /// Validates hermiticity, trace one and positivity (min eigenvalue >= -1e-10).
  DensityMatrix(CMatrix matrix, std::vector<int> dims);
  static DensityMatrix from_pure(const StateVector& psi);

  const CMatrix& matrix() const noexcept { return matrix_; }
  const std::vector<int>& dims() const noexcept { return dims_; }

 private:
  CMatrix matrix_;
  std::vector<int> dims_;
};

using SourceState = std::variant<StateVector, DensityMatrix>;

const std::vector<int>& particle_dims(const SourceState& state);

/// Measurement with PSD effects summing to the identity.
class Povm {
 public:
  explicit Povm(std::vector<CMatrix> effects);
  /// Rank-1 projective measurement onto the columns of an orthonormal basis.
  static Povm projective(const CMatrix& basis);

  const std::vector<CMatrix>& effects() const noexcept { return effects_; }
  int dim() const noexcept { return static_cast<int>(effects_.front().rows()); }
  int n_outcomes() const noexcept { return static_cast<int>(effects_.size()); }

 private:
  std::vector<CMatrix> effects_;
};

/// Permutation matching particles (sources in network order, particles in
/// each source's tensor order) to measurement Hilbert spaces (parties in
/// network order): particle `order[l]` occupies slot l.
class HilbertWiring {
 public:
  explicit HilbertWiring(std::vector<int> order);
  const std::vector<int>& order() const noexcept { return order_; }
  std::size_t size() const noexcept { return order_.size(); }
  HilbertWiring inverse() const;

 private:
  std::vector<int> order_;
};

HilbertWiring parse_wiring(std::string_view text);

/// Ring wiring for n bipartite sources given in ring order, generalizing
/// [5,0,1,2,3,4] for the triangle: slot l takes particle (l - 1) mod 2n.
HilbertWiring ring_wiring(int n_sources);

/// Wiring that hands each party, in its configured source order, the next
/// unused particle of each of its sources; surplus particles of a source go
/// to its last receiving party. `particles_per_source` is in network source order.
HilbertWiring auto_wiring(const NetworkConfig& config, const std::vector<int>& particles_per_source);

/// True when every party's slots are filled by particles of exactly the
/// sources it lists (ignoring order within the party).
bool wiring_matches_config(const NetworkConfig& config, const std::vector<int>& particles_per_source,
                           const HilbertWiring& wiring);

enum class BellKind { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

StateVector bell_state(BellKind kind);
/// family 1: cos(t/2)|phi+> + i sin(t/2)|psi+>; family 2: same with phi-, psi-.
StateVector rotated_state(double theta, int family);
/// V |psi><psi| + (1 - V) I/4 on two qubits.
DensityMatrix werner(const StateVector& pure, double visibility);

/// Qubit ket with Bloch vector m; <0|m> is real and non-negative.
CVector bloch_ket(const Eigen::Vector3d& m);
/// Regular tetrahedron (1,1,1), (1,-1,-1), (-1,1,-1), (-1,-1,1), normalized.
std::vector<Eigen::Vector3d> tetrahedron_vectors();

/// Eigenbasis {|00>, u|01> + v|10>, v|01> - u|10>, |11>}, v = sqrt(1 - u^2).
Povm rgb4_povm(double u);
/// Tetrahedral joint measurement; mu = 0 is the elegant joint measurement.
Povm tetra_joint_measurement(double mu);
Povm computational_basis_povm(int n_qubits);

/// Born-rule outcome distribution of a network. `states` follow the network
/// source order, `povms` the party order. Parties take consecutive slots
/// until their POVM dimension is reached. Mixed states switch evaluation to
/// the trace form.
Distribution born_distribution(const NetworkConfig& net, const std::vector<SourceState>& states,
                               const std::vector<Povm>& povms, const HilbertWiring& wiring);

/// `merges[i][old]` is the new outcome of party i; each map must be onto
/// 0..k-1 for some k.
Distribution coarse_grain(const Distribution& dist, const std::vector<std::vector<int>>& merges);

}  // namespace netlocal::quantum
