#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace netlocal {

/// Raised for malformed or inconsistent network configuration documents.
/// `where()` names the offending location (e.g. `parties.a2.outcomes`).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string where, const std::string& what)
      : std::invalid_argument(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

struct PartySpec {
  std::string name;
  std::vector<std::string> sources;
  int n_outcomes = 2;

  bool operator==(const PartySpec&) const = default;
};

/// Parties with the sources they receive. Party order fixes the outcome
/// tuple order; source order is order of first appearance.
class NetworkConfig {
 public:
  NetworkConfig() = default;
  explicit NetworkConfig(std::vector<PartySpec> parties);

  const std::vector<PartySpec>& parties() const noexcept { return parties_; }
  const std::vector<std::string>& sources() const noexcept { return sources_; }
  std::size_t n_parties() const noexcept { return parties_.size(); }
  std::size_t n_sources() const noexcept { return sources_.size(); }

  /// Column of `name` in a hidden-variable sample.
  std::size_t source_index(std::string_view name) const;
  /// For every party, indices of its sources in `sources()`.
  std::vector<std::vector<std::size_t>> party_source_indices() const;
  std::vector<int> outcome_shape() const;
  std::size_t n_joint_outcomes() const;
  /// Sources that feed a single party only. Accepted, but they carry no
  /// correlations.
  std::vector<std::string> dangling_sources() const;

  bool operator==(const NetworkConfig&) const = default;

 private:
  std::vector<PartySpec> parties_;
  std::vector<std::string> sources_;
};

/// Parses `{"parties": {"<name>": {"sources": [...], "outcomes": k}, ...}}`.
NetworkConfig parse_config(std::string_view text);
std::string config_to_json(const NetworkConfig& config, int indent = 2);

/// Ring of `n` parties and `n` bipartite sources. Party i receives
/// (lambda_i, lambda_{i-1}), which for n = 3 is the usual triangle.
NetworkConfig ring_network(int n, int outcomes = 4);
NetworkConfig triangle_network(int outcomes = 4);

/// Row-major bijection between outcome tuples and flat indices; the last
/// party varies fastest.
class OutcomeIndexer {
 public:
  OutcomeIndexer() = default;
  explicit OutcomeIndexer(std::vector<int> shape);

  const std::vector<int>& shape() const noexcept { return shape_; }
  std::size_t total() const noexcept { return total_; }
  std::size_t index(std::span<const int> tuple) const;
  std::vector<int> tuple(std::size_t index) const;

  bool operator==(const OutcomeIndexer&) const = default;

 private:
  std::vector<int> shape_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
};

/// Normalized probability vector over joint outcomes.
class Distribution {
 public:
  static constexpr double kNormTolerance = 1e-9;

  Distribution() = default;
  /// Throws if any entry is negative or the sum is off by more than 1e-9.
  Distribution(OutcomeIndexer indexer, std::vector<double> probs);

  static Distribution uniform(const OutcomeIndexer& indexer);

  const OutcomeIndexer& indexer() const noexcept { return indexer_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double at(std::span<const int> tuple) const { return probs_[indexer_.index(tuple)]; }

 private:
  OutcomeIndexer indexer_;
  std::vector<double> probs_;
};

inline constexpr double kKlClamp = 1e-12;

/// KL(p || q) with natural log; q is clamped below by kKlClamp.
double kl_divergence(const Distribution& p, const Distribution& q);
double euclidean_distance(const Distribution& p, const Distribution& q);

/// Same as above on raw vectors of equal length (used on the hot path).
double kl_divergence(std::span<const double> p, std::span<const double> q);
double euclidean_distance(std::span<const double> p, std::span<const double> q);

/// Reads a flat JSON numeric array, or a file with one number per line.
std::vector<double> parse_probability_array(std::string_view text);

}  // namespace netlocal
