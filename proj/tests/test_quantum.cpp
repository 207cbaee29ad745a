#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "born_oracle.hpp"
#include "netlocal/quantum.hpp"
#include "netlocal/targets.hpp"

using namespace netlocal;
using namespace netlocal::quantum;

namespace {

const double kS = 1.0 / std::sqrt(2.0);

void check_povm(const Povm& povm) {
  CMatrix sum = CMatrix::Zero(povm.dim(), povm.dim());
  for (const auto& e : povm.effects()) {
    CHECK((e - e.adjoint()).norm() < 1e-10);
    CHECK(Eigen::SelfAdjointEigenSolver<CMatrix>(e).eigenvalues().minCoeff() > -1e-10);
    sum += e;
  }
  CHECK((sum - CMatrix::Identity(povm.dim(), povm.dim())).norm() < 1e-10);
}

CMatrix partial_trace_second(const CVector& psi) {
  CMatrix r = CMatrix::Zero(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int k = 0; k < 2; ++k) r(a, b) += psi[2 * a + k] * std::conj(psi[2 * b + k]);
  return r;
}

CVector rank1_vector(const CMatrix& projector) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(projector);
  return es.eigenvectors().col(projector.rows() - 1);
}

}  // namespace

TEST_CASE("Bell states") {
  const auto psi_plus = bell_state(BellKind::PsiPlus);
  const auto phi_plus = bell_state(BellKind::PhiPlus);
  CHECK(std::abs(psi_plus[0]) < 1e-15);
  CHECK(std::abs(psi_plus[1] - kS) < 1e-15);
  CHECK(std::abs(psi_plus[2] - kS) < 1e-15);
  CHECK(std::abs(phi_plus[0] - kS) < 1e-15);
  CHECK(std::abs(phi_plus[3] - kS) < 1e-15);
  CHECK(std::abs(phi_plus.amplitudes().dot(psi_plus.amplitudes())) < 1e-15);
  CHECK(psi_plus.dims() == std::vector<int>{2, 2});
}

TEST_CASE("rotated states") {
  const auto phi_plus = bell_state(BellKind::PhiPlus).amplitudes();
  const auto psi_plus = bell_state(BellKind::PsiPlus).amplitudes();
  CHECK((rotated_state(0.0, 1).amplitudes() - phi_plus).norm() < 1e-15);
  CHECK((rotated_state(std::numbers::pi, 1).amplitudes() - cplx(0, 1) * psi_plus).norm() < 1e-15);
  CHECK((rotated_state(std::numbers::pi / 2, 1).amplitudes() - kS * (phi_plus + cplx(0, 1) * psi_plus)).norm() < 1e-15);
  const auto phi_minus = bell_state(BellKind::PhiMinus).amplitudes();
  const auto psi_minus = bell_state(BellKind::PsiMinus).amplitudes();
  CHECK((rotated_state(1.0, 2).amplitudes() - (std::cos(0.5) * phi_minus + cplx(0, std::sin(0.5)) * psi_minus)).norm() <
        1e-15);
  CHECK_THROWS(rotated_state(-0.1, 1));
  CHECK_THROWS(rotated_state(3.2, 1));
  CHECK_THROWS(rotated_state(1.0, 3));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(0.0, std::numbers::pi);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(rotated_state(th(rng), 1 + i % 2).amplitudes().norm() - 1.0) < 1e-12);
}

TEST_CASE("Werner states") {
  const auto psi = bell_state(BellKind::PsiPlus);
  CHECK((werner(psi, 1.0).matrix() - psi.amplitudes() * psi.amplitudes().adjoint()).norm() < 1e-15);
  CHECK((werner(psi, 0.0).matrix() - CMatrix::Identity(4, 4) / 4.0).norm() < 1e-15);
  Eigen::Vector4d ev = Eigen::SelfAdjointEigenSolver<CMatrix>(werner(psi, 0.5).matrix()).eigenvalues();
  CHECK(ev[0] == doctest::Approx(0.125));
  CHECK(ev[1] == doctest::Approx(0.125));
  CHECK(ev[2] == doctest::Approx(0.125));
  CHECK(ev[3] == doctest::Approx(0.625));
  CHECK_THROWS(werner(psi, 1.5));
  CHECK_THROWS(werner(StateVector(CVector::Ones(2) * kS, {2}), 0.5));
}

TEST_CASE("RGB4 measurement") {
  const auto at1 = rgb4_povm(1.0);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(at1.effects()[static_cast<std::size_t>(k)](k, k) - 1.0) < 1e-15);
  const auto mid = rgb4_povm(kS);
  CHECK(std::abs(std::abs(rank1_vector(mid.effects()[1]).dot(bell_state(BellKind::PsiPlus).amplitudes())) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(rank1_vector(mid.effects()[2]).dot(bell_state(BellKind::PsiMinus).amplitudes())) - 1.0) < 1e-12);
  CHECK_THROWS(rgb4_povm(1.01));
  CHECK_THROWS(rgb4_povm(-0.1));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const auto povm = rgb4_povm(uu(rng));
    CMatrix gram(4, 4);
    std::vector<CVector> vs;
    for (const auto& e : povm.effects()) vs.push_back(rank1_vector(e));
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        gram(a, b) = vs[static_cast<std::size_t>(a)].dot(vs[static_cast<std::size_t>(b)]);
    CHECK((gram - CMatrix::Identity(4, 4)).norm() < 1e-10);
  }
}

TEST_CASE("tetrahedral joint measurement") {
  CHECK_THROWS(tetra_joint_measurement(-0.01));
  CHECK_THROWS(tetra_joint_measurement(1.6));
  check_povm(tetra_joint_measurement(0.0));
  // Bell-basis end: every eigenvector is maximally entangled
  const auto bsm = tetra_joint_measurement(std::numbers::pi / 2);
  for (const auto& e : bsm.effects()) {
    const CVector v = rank1_vector(e);
    CHECK((partial_trace_second(v) - CMatrix::Identity(2, 2) / 2.0).norm() < 1e-10);
  }
  // EJM: reduced states of the eigenvectors point along m_b with length sqrt(3)/2
  const auto ejm = tetra_joint_measurement(0.0);
  const auto m = tetrahedron_vectors();
  for (std::size_t b = 0; b < 4; ++b) {
    const CMatrix r = partial_trace_second(rank1_vector(ejm.effects()[b]));
    const Eigen::Vector3d bloch(2 * r(0, 1).real(), -2 * r(0, 1).imag(), (r(0, 0) - r(1, 1)).real());
    CHECK((bloch - m[b] * std::sqrt(3.0) / 2.0).norm() < 1e-10);
  }
}

TEST_CASE("Bloch kets") {
  for (const auto& m : tetrahedron_vectors()) {
    const CVector k = bloch_ket(m);
    CMatrix sigma(2, 2);
    sigma << m.z(), cplx(m.x(), -m.y()), cplx(m.x(), m.y()), -m.z();
    CHECK((sigma * k - k).norm() < 1e-12);
    CHECK(k[0].imag() == 0.0);
    CHECK(k[0].real() >= 0.0);
    CHECK(std::abs(bloch_ket(-m).dot(k)) < 1e-12);
  }
}

TEST_CASE("random family draws satisfy invariants") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    check_povm(rgb4_povm(unit(rng)));
    check_povm(tetra_joint_measurement(unit(rng) * std::numbers::pi / 2));
    const auto w = werner(rotated_state(unit(rng) * std::numbers::pi, 1), unit(rng));
    CHECK(std::abs(w.matrix().trace() - 1.0) < 1e-10);
    CHECK(Eigen::SelfAdjointEigenSolver<CMatrix>(w.matrix()).eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("constructor validation") {
  CHECK_THROWS(StateVector(CVector::Ones(4), {2, 2}));
  CHECK_THROWS(StateVector(CVector::Ones(3) / std::sqrt(3.0), {2, 2}));
  CMatrix not_psd = CMatrix::Zero(2, 2);
  not_psd(0, 0) = 1.5;
  not_psd(1, 1) = -0.5;
  CHECK_THROWS(DensityMatrix(not_psd, {2}));
  CHECK_THROWS(Povm({CMatrix::Identity(2, 2) * 0.5}));
  CHECK_THROWS(HilbertWiring({0, 0, 1}));
  CHECK(parse_wiring("5,0,1,2,3,4").order() == std::vector<int>{5, 0, 1, 2, 3, 4});
  CHECK(ring_wiring(3).order() == std::vector<int>{5, 0, 1, 2, 3, 4});
  CHECK_THROWS(parse_wiring("1,2,x"));
}

TEST_CASE("single party Born rule") {
  const auto net = parse_config(R"({"parties": {"a1": {"sources": ["l1"], "outcomes": 4}}})");
  const auto p = born_distribution(net, {bell_state(BellKind::PhiPlus)}, {computational_basis_povm(2)},
                                   HilbertWiring({0, 1}));
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.0));
  CHECK(p[2] == doctest::Approx(0.0));
  CHECK(p[3] == doctest::Approx(0.5));
}

TEST_CASE("triangle RGB4 at u = 1 matches the brute-force oracle") {
  const auto net = triangle_network(4);
  const std::vector<SourceState> states(3, bell_state(BellKind::PsiPlus));
  const std::vector<Povm> povms(3, rgb4_povm(1.0));
  const std::vector<int> order{5, 0, 1, 2, 3, 4};
  const auto p = born_distribution(net, states, povms, HilbertWiring(order));
  const auto ref = oracle::born(net, states, povms, order);
  for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(p[i] - ref[i]) < 1e-12);
  CHECK(p.at(std::vector<int>{0, 0, 0}) == 0.0);
  // every party sees one qubit from each neighbour; with anti-correlated
  // pairs only 8 of the 64 tuples are possible, each with weight 1/8
  int support = 0;
  for (std::size_t i = 0; i < 64; ++i)
    if (p[i] > 1e-12) {
      ++support;
      CHECK(p[i] == doctest::Approx(0.125));
    }
  CHECK(support == 8);
}

TEST_CASE("elegant distribution on the triangle") {
  const auto net = triangle_network(4);
  const std::vector<SourceState> states(3, bell_state(BellKind::PsiMinus));
  const std::vector<Povm> povms(3, tetra_joint_measurement(0.0));
  const auto p = born_distribution(net, states, povms, ring_wiring(3));
  const auto ref = oracle::born(net, states, povms, ring_wiring(3).order());
  for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(p[i] - ref[i]) < 1e-12);
  CHECK(p.at(std::vector<int>{0, 0, 0}) == doctest::Approx(25.0 / 256));
  CHECK(p.at(std::vector<int>{0, 0, 1}) == doctest::Approx(1.0 / 256));
  CHECK(p.at(std::vector<int>{0, 1, 2}) == doctest::Approx(5.0 / 256));
}

TEST_CASE("mixed sources match the oracle") {
  const auto net = triangle_network(4);
  const std::vector<SourceState> states{werner(bell_state(BellKind::PsiPlus), 0.7),
                                        rotated_state(0.4, 1), werner(rotated_state(2.0, 2), 0.9)};
  const std::vector<Povm> povms{rgb4_povm(0.8), tetra_joint_measurement(0.3), computational_basis_povm(2)};
  for (const auto& order : {std::vector<int>{5, 0, 1, 2, 3, 4}, std::vector<int>{0, 2, 4, 1, 3, 5},
                            std::vector<int>{3, 1, 4, 0, 5, 2}}) {
    const auto p = born_distribution(net, states, povms, HilbertWiring(order));
    const auto ref = oracle::born(net, states, povms, order);
    for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(p[i] - ref[i]) < 1e-10);
  }
}

TEST_CASE("wiring and its inverse") {
  // Measuring a relabelled state with the inverse wiring gives the original distribution.
  const auto net = parse_config(R"({"parties": {"a": {"sources": ["x", "y"], "outcomes": 4},
                                                 "b": {"sources": ["x", "y"], "outcomes": 4}}})");
  const std::vector<SourceState> states{rotated_state(0.7, 1), bell_state(BellKind::PsiMinus)};
  const std::vector<Povm> povms{rgb4_povm(0.6), tetra_joint_measurement(0.2)};
  const HilbertWiring w({2, 0, 3, 1});
  const auto ref = born_distribution(net, states, povms, w);
  const auto inv = w.inverse();
  std::vector<int> composed(4);
  for (int l = 0; l < 4; ++l) composed[static_cast<std::size_t>(l)] = w.order()[static_cast<std::size_t>(inv.order()[static_cast<std::size_t>(l)])];
  CHECK(composed == std::vector<int>{0, 1, 2, 3});
  // the oracle with an explicit permutation agrees with the evaluator
  const auto dense = oracle::born(net, states, povms, w.order());
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ref[i] - dense[i]) < 1e-12);
}

TEST_CASE("Born rule input validation") {
  const auto net = triangle_network(4);
  const std::vector<SourceState> states(3, bell_state(BellKind::PsiPlus));
  const std::vector<Povm> povms(3, rgb4_povm(1.0));
  CHECK_THROWS(born_distribution(net, states, povms, HilbertWiring({0, 1, 2, 3, 4})));
  CHECK_THROWS(born_distribution(net, {states[0], states[1]}, povms, ring_wiring(3)));
  CHECK_THROWS(born_distribution(triangle_network(3), states, povms, ring_wiring(3)));
  const std::vector<Povm> wrong_dim{rgb4_povm(1.0), rgb4_povm(1.0), computational_basis_povm(1)};
  CHECK_THROWS(born_distribution(net, states, wrong_dim, ring_wiring(3)));
}

TEST_CASE("coarse graining") {
  const auto net = triangle_network(4);
  const std::vector<SourceState> states(3, bell_state(BellKind::PsiMinus));
  const auto p = born_distribution(net, states, std::vector<Povm>(3, tetra_joint_measurement(0.0)), ring_wiring(3));
  const std::vector<std::vector<int>> identity(3, {0, 1, 2, 3});
  CHECK(coarse_grain(p, identity).probs() == p.probs());
  const auto one = coarse_grain(p, std::vector<std::vector<int>>(3, {0, 0, 0, 0}));
  CHECK(one.size() == 1);
  CHECK(one[0] == doctest::Approx(1.0));
  CHECK_THROWS(coarse_grain(p, std::vector<std::vector<int>>(3, {0, 0, 2, 2})));
  CHECK_THROWS(coarse_grain(p, std::vector<std::vector<int>>(3, {0, 1, 2, 4})));
  CHECK_THROWS(coarse_grain(p, std::vector<std::vector<int>>(2, {0, 1, 2, 3})));

  TargetSpec spec;
  spec.network = ring_network(5, 4);
  spec.state = StateFamily::Rotated1;
  spec.theta = 1.0;
  spec.measurement = MeasurementFamily::Tetra;
  spec.coarse = parse_coarse("01", spec.network);
  CHECK(spec.coarse.front() == std::vector<int>{0, 0, 1, 2});
  const auto pent = build_target(spec);
  CHECK(pent.size() == 243);
  CHECK(coarse_network(spec.network, spec.coarse).n_joint_outcomes() == 243);
  double total = 0;
  for (double v : pent.probs()) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coarse map parsing") {
  const auto net = triangle_network(4);
  CHECK(parse_coarse("01,23", net).front() == std::vector<int>{0, 0, 1, 1});
  CHECK(parse_coarse("13", net).front() == std::vector<int>{0, 1, 2, 1});
  CHECK_THROWS(parse_coarse("05", net));
  CHECK_THROWS(parse_coarse("01,12", net));
  CHECK_THROWS(parse_coarse("0a", net));
}

TEST_CASE("raw matrices from JSON") {
  const auto doc = nlohmann::json::parse(R"({
    "states": [{"dims": [2, 2], "vector": [[0.7071067811865476, 0], 0, 0, [0.7071067811865476, 0]]}],
    "povms": [{"effects": [[[1,0],[0,0]], [[0,0],[0,1]]]}]})");
  const auto states = parse_raw_states(doc);
  REQUIRE(states.size() == 1);
  CHECK(particle_dims(states[0]) == std::vector<int>{2, 2});
  CHECK(parse_raw_povms(doc).size() == 1);
  CHECK_THROWS(parse_raw_povms(nlohmann::json::parse(R"({"povms": [{"effects": [[[1, 0]]]}]})")));
}
