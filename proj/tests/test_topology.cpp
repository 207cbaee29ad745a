#include <doctest.h>

#include <cmath>
#include <random>

#include "netlocal/topology.hpp"

using namespace netlocal;

namespace {

const char* kTriangle = R"({"parties": {
  "a1": {"sources": ["l1", "l3"], "outcomes": 4},
  "a2": {"sources": ["l2", "l1"], "outcomes": 4},
  "a3": {"sources": ["l3", "l2"], "outcomes": 4}}})";

std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0;
  for (auto& v : p) s += (v = e(rng));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("triangle config parses with first-appearance source order") {
  const auto cfg = parse_config(kTriangle);
  CHECK(cfg.n_parties() == 3);
  CHECK(cfg.n_sources() == 3);
  CHECK(cfg.n_joint_outcomes() == 64);
  CHECK(cfg.sources() == std::vector<std::string>{"l1", "l3", "l2"});
  CHECK(cfg.parties()[1].name == "a2");
  CHECK(cfg.party_source_indices()[1] == std::vector<std::size_t>{2, 0});
  CHECK(cfg.dangling_sources().empty());
}

TEST_CASE("single party and pentagon configs") {
  const auto single = parse_config(R"({"parties": {"a1": {"sources": ["l1"], "outcomes": 2}}})");
  CHECK(single.n_parties() == 1);
  CHECK(single.n_sources() == 1);
  CHECK(single.n_joint_outcomes() == 2);
  CHECK(single.dangling_sources() == std::vector<std::string>{"l1"});

  const auto pentagon = ring_network(5, 4);
  CHECK(pentagon.n_parties() == 5);
  CHECK(pentagon.n_sources() == 5);
  CHECK(pentagon.n_joint_outcomes() == 1024);
  CHECK(parse_config(config_to_json(pentagon)) == pentagon);
}

TEST_CASE("config errors carry a location") {
  CHECK_THROWS_AS(parse_config(R"({"parties": {"a": {"sources": ["x"], "outcomes": 2}, "a": {"sources": ["y"], "outcomes": 2}}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"parties": {"a": {"sources": [], "outcomes": 2}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"parties": {"a": {"sources": ["x"], "outcomes": 1}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"parties": {"a": {"sources": ["x", "x"], "outcomes": 2}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"parties": {"a": )"), ConfigError);
  try {
    parse_config(R"({"parties": {"a1": {"sources": ["x"], "outcomes": 2}, "a2": {"sources": ["x"], "outcomes": 0}}})");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.where().find("a2") != std::string::npos);
  }
}

TEST_CASE("row-major outcome indexing") {
  const OutcomeIndexer idx({4, 4, 4});
  CHECK(idx.total() == 64);
  CHECK(idx.index(std::vector<int>{0, 0, 0}) == 0);
  CHECK(idx.index(std::vector<int>{0, 0, 1}) == 1);
  CHECK(idx.index(std::vector<int>{3, 3, 3}) == 63);
  CHECK_THROWS(idx.index(std::vector<int>{0, 4, 0}));
  const OutcomeIndexer mixed({2, 3, 5});
  for (std::size_t i = 0; i < mixed.total(); ++i) CHECK(mixed.index(mixed.tuple(i)) == i);
}

TEST_CASE("distribution validation") {
  const OutcomeIndexer idx({2});
  CHECK_NOTHROW(Distribution(idx, {0.5, 0.5}));
  CHECK_THROWS(Distribution(idx, {0.6, 0.5}));
  CHECK_THROWS(Distribution(idx, {1.1, -0.1}));
  CHECK_THROWS(Distribution(idx, {1.0}));
}

TEST_CASE("distance examples") {
  const OutcomeIndexer idx({2});
  const Distribution p(idx, {0.5, 0.5}), q(idx, {0.25, 0.75});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(euclidean_distance(p, p) == 0.0);
  CHECK(kl_divergence(p, q) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-14));
  CHECK(kl_divergence(p, q) == doctest::Approx(0.14384).epsilon(1e-4));
  CHECK(euclidean_distance(p, q) == doctest::Approx(std::sqrt(2.0) / 4).epsilon(1e-14));
  CHECK(euclidean_distance(Distribution(idx, {1, 0}), Distribution(idx, {0, 1})) ==
        doctest::Approx(std::sqrt(2.0)));
  const std::vector<double> a{1.0, 0.0}, b{1.0 - kKlClamp, kKlClamp};
  CHECK(kl_divergence(a, b) == doctest::Approx(-std::log1p(-kKlClamp)).epsilon(1e-9));
  CHECK(kl_divergence(p, q) != doctest::Approx(kl_divergence(q, p)));
  CHECK_THROWS(kl_divergence(p, Distribution::uniform(OutcomeIndexer({4}))));
}

TEST_CASE("distance properties on random triples") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_simplex(16, rng), q = random_simplex(16, rng), r = random_simplex(16, rng);
    CHECK(euclidean_distance(p, r) <= euclidean_distance(p, q) + euclidean_distance(q, r) + 1e-12);
    CHECK(euclidean_distance(p, q) == doctest::Approx(euclidean_distance(q, p)));
    CHECK(kl_divergence(p, q) >= 0.0);
  }
}

TEST_CASE("probability arrays parse from JSON or lines") {
  CHECK(parse_probability_array("[0.25, 0.75]") == std::vector<double>{0.25, 0.75});
  CHECK(parse_probability_array("0.25\n0.75\n") == std::vector<double>{0.25, 0.75});
  CHECK_THROWS(parse_probability_array("[0.25, \"x\"]"));
}
