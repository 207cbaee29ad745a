#include "netlocal/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace netlocal {

using ordered_json = nlohmann::ordered_json;

NetworkConfig::NetworkConfig(std::vector<PartySpec> parties) : parties_(std::move(parties)) {
  if (parties_.empty()) throw ConfigError("parties", "network has no parties");
  std::set<std::string> names;
  for (const auto& party : parties_) {
    const std::string where = "parties." + party.name;
    if (!names.insert(party.name).second) throw ConfigError(where, "duplicate party name");
    if (party.sources.empty()) throw ConfigError(where + ".sources", "empty source list");
    if (party.n_outcomes < 2) throw ConfigError(where + ".outcomes", "need at least 2 outcomes");
    std::set<std::string> seen;
    for (const auto& src : party.sources) {
      if (!seen.insert(src).second) throw ConfigError(where + ".sources", "duplicate source '" + src + "'");
      if (std::find(sources_.begin(), sources_.end(), src) == sources_.end()) sources_.push_back(src);
    }
  }
}

std::size_t NetworkConfig::source_index(std::string_view name) const {
  auto it = std::find(sources_.begin(), sources_.end(), name);
  if (it == sources_.end()) throw std::out_of_range("unknown source '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - sources_.begin());
}

std::vector<std::vector<std::size_t>> NetworkConfig::party_source_indices() const {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(parties_.size());
  for (const auto& party : parties_) {
    std::vector<std::size_t> idx;
    for (const auto& s : party.sources) idx.push_back(source_index(s));
    out.push_back(std::move(idx));
  }
  return out;
}

std::vector<int> NetworkConfig::outcome_shape() const {
  std::vector<int> shape;
  for (const auto& p : parties_) shape.push_back(p.n_outcomes);
  return shape;
}

std::size_t NetworkConfig::n_joint_outcomes() const {
  std::size_t total = 1;
  for (const auto& p : parties_) total *= static_cast<std::size_t>(p.n_outcomes);
  return total;
}

std::vector<std::string> NetworkConfig::dangling_sources() const {
  std::vector<std::string> out;
  for (const auto& src : sources_) {
    auto uses = std::count_if(parties_.begin(), parties_.end(), [&](const PartySpec& p) {
      return std::find(p.sources.begin(), p.sources.end(), src) != p.sources.end();
    });
    if (uses == 1) out.push_back(src);
  }
  return out;
}

NetworkConfig parse_config(std::string_view text) {
  // nlohmann keeps only the last value of a repeated key, so duplicate party
  // names have to be caught while parsing.
  std::string top_key;
  std::set<std::string> party_names;
  ordered_json::parser_callback_t on_event = [&](int depth, ordered_json::parse_event_t ev, ordered_json& parsed) {
    if (ev != ordered_json::parse_event_t::key) return true;
    if (depth == 1) top_key = parsed.get<std::string>();
    if (depth == 2 && top_key == "parties") {
      const auto key = parsed.get<std::string>();
      if (!party_names.insert(key).second) throw ConfigError("parties." + key, "duplicate party name");
    }
    return true;
  };
  ordered_json doc;
  try {
    doc = ordered_json::parse(text, on_event);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError("byte " + std::to_string(e.byte), std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("parties")) throw ConfigError("", "missing top-level \"parties\" object");
  const auto& parties = doc["parties"];
  if (!parties.is_object()) throw ConfigError("parties", "expected an object keyed by party name");

  std::vector<PartySpec> specs;
  for (const auto& [name, body] : parties.items()) {
    const std::string where = "parties." + name;
    if (!body.is_object()) throw ConfigError(where, "expected {\"sources\": [...], \"outcomes\": n}");
    if (!body.contains("sources") || !body["sources"].is_array())
      throw ConfigError(where + ".sources", "expected an array of source names");
    if (!body.contains("outcomes") || !body["outcomes"].is_number_integer())
      throw ConfigError(where + ".outcomes", "expected an integer");
    PartySpec spec;
    spec.name = name;
    for (const auto& s : body["sources"]) {
      if (!s.is_string()) throw ConfigError(where + ".sources", "source names must be strings");
      spec.sources.push_back(s.get<std::string>());
    }
    spec.n_outcomes = body["outcomes"].get<int>();
    specs.push_back(std::move(spec));
  }
  return NetworkConfig(std::move(specs));
}

std::string config_to_json(const NetworkConfig& config, int indent) {
  ordered_json parties = ordered_json::object();
  for (const auto& p : config.parties()) parties[p.name] = {{"sources", p.sources}, {"outcomes", p.n_outcomes}};
  return ordered_json{{"parties", parties}}.dump(indent);
}

NetworkConfig ring_network(int n, int outcomes) {
  if (n < 2) throw std::invalid_argument("ring needs at least 2 parties");
  std::vector<PartySpec> parties;
  for (int i = 1; i <= n; ++i) {
    const int prev = i == 1 ? n : i - 1;
    parties.push_back({"a" + std::to_string(i), {"lambda" + std::to_string(i), "lambda" + std::to_string(prev)}, outcomes});
  }
  return NetworkConfig(std::move(parties));
}

NetworkConfig triangle_network(int outcomes) { return ring_network(3, outcomes); }

OutcomeIndexer::OutcomeIndexer(std::vector<int> shape) : shape_(std::move(shape)) {
  strides_.assign(shape_.size(), 1);
  total_ = 1;
  for (std::size_t k = shape_.size(); k-- > 0;) {
    if (shape_[k] < 1) throw std::invalid_argument("outcome counts must be positive");
    strides_[k] = total_;
    total_ *= static_cast<std::size_t>(shape_[k]);
  }
}

std::size_t OutcomeIndexer::index(std::span<const int> tuple) const {
  if (tuple.size() != shape_.size()) throw std::out_of_range("outcome tuple has wrong length");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    if (tuple[k] < 0 || tuple[k] >= shape_[k])
      throw std::out_of_range("outcome " + std::to_string(tuple[k]) + " out of range for party " + std::to_string(k));
    idx += static_cast<std::size_t>(tuple[k]) * strides_[k];
  }
  return idx;
}

std::vector<int> OutcomeIndexer::tuple(std::size_t index) const {
  if (index >= total_) throw std::out_of_range("flat outcome index out of range");
  std::vector<int> t(shape_.size());
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    t[k] = static_cast<int>(index / strides_[k]);
    index %= strides_[k];
  }
  return t;
}

Distribution::Distribution(OutcomeIndexer indexer, std::vector<double> probs)
    : indexer_(std::move(indexer)), probs_(std::move(probs)) {
  if (probs_.size() != indexer_.total())
    throw std::invalid_argument("distribution has " + std::to_string(probs_.size()) + " entries, expected " +
                                std::to_string(indexer_.total()));
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw std::invalid_argument("distribution has a negative or NaN entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormTolerance)
    throw std::invalid_argument("distribution sums to " + std::to_string(sum) + ", not 1");
}

Distribution Distribution::uniform(const OutcomeIndexer& indexer) {
  return Distribution(indexer, std::vector<double>(indexer.total(), 1.0 / static_cast<double>(indexer.total())));
}

namespace {
void require_same_shape(const Distribution& p, const Distribution& q) {
  if (!(p.indexer() == q.indexer())) throw std::invalid_argument("distributions have different outcome shapes");
}
}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("distributions have different lengths");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * std::log(p[i] / std::max(q[i], kKlClamp));
  }
  return kl;
}

double euclidean_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("distributions have different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
  return std::sqrt(s);
}

double kl_divergence(const Distribution& p, const Distribution& q) {
  require_same_shape(p, q);
  return kl_divergence(std::span<const double>(p.probs()), std::span<const double>(q.probs()));
}

double euclidean_distance(const Distribution& p, const Distribution& q) {
  require_same_shape(p, q);
  return euclidean_distance(std::span<const double>(p.probs()), std::span<const double>(q.probs()));
}

std::vector<double> parse_probability_array(std::string_view text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '[') {
    auto doc = nlohmann::json::parse(text);
    std::vector<double> out;
    for (const auto& v : doc) {
      if (!v.is_number()) throw std::invalid_argument("probability array must be numeric");
      out.push_back(v.get<double>());
    }
    return out;
  }
  std::vector<double> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw std::invalid_argument("line " + std::to_string(out.size() + 1) + " is not a number: " + line);
    }
  }
  return out;
}

}  // namespace netlocal
