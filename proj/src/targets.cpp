#include "netlocal/targets.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace netlocal {

using namespace quantum;

StateFamily parse_state_family(std::string_view name) {
  static const std::map<std::string, StateFamily, std::less<>> names{
      {"phi_plus", StateFamily::PhiPlus}, {"phi_minus", StateFamily::PhiMinus}, {"psi_plus", StateFamily::PsiPlus},
      {"psi_minus", StateFamily::PsiMinus}, {"rotated1", StateFamily::Rotated1}, {"rotated2", StateFamily::Rotated2}};
  auto it = names.find(name);
  if (it == names.end()) throw std::invalid_argument("unknown state family '" + std::string(name) + "'");
  return it->second;
}

MeasurementFamily parse_measurement_family(std::string_view name) {
  if (name == "rgb4") return MeasurementFamily::Rgb4;
  if (name == "tetra" || name == "ejm") return MeasurementFamily::Tetra;
  if (name == "computational") return MeasurementFamily::Computational;
  throw std::invalid_argument("unknown measurement family '" + std::string(name) + "'");
}

std::string_view to_string(StateFamily f) {
  switch (f) {
    case StateFamily::PhiPlus: return "phi_plus";
    case StateFamily::PhiMinus: return "phi_minus";
    case StateFamily::PsiPlus: return "psi_plus";
    case StateFamily::PsiMinus: return "psi_minus";
    case StateFamily::Rotated1: return "rotated1";
    case StateFamily::Rotated2: return "rotated2";
  }
  return "?";
}

std::string_view to_string(MeasurementFamily f) {
  switch (f) {
    case MeasurementFamily::Rgb4: return "rgb4";
    case MeasurementFamily::Tetra: return "tetra";
    case MeasurementFamily::Computational: return "computational";
  }
  return "?";
}

StateVector family_state(StateFamily family, double theta) {
  switch (family) {
    case StateFamily::PhiPlus: return bell_state(BellKind::PhiPlus);
    case StateFamily::PhiMinus: return bell_state(BellKind::PhiMinus);
    case StateFamily::PsiPlus: return bell_state(BellKind::PsiPlus);
    case StateFamily::PsiMinus: return bell_state(BellKind::PsiMinus);
    case StateFamily::Rotated1: return rotated_state(theta, 1);
    case StateFamily::Rotated2: return rotated_state(theta, 2);
  }
  throw std::logic_error("unhandled state family");
}

Povm family_povm(MeasurementFamily family, double u, double mu) {
  switch (family) {
    case MeasurementFamily::Rgb4: return rgb4_povm(u);
    case MeasurementFamily::Tetra: return tetra_joint_measurement(mu);
    case MeasurementFamily::Computational: return computational_basis_povm(2);
  }
  throw std::logic_error("unhandled measurement family");
}

HilbertWiring default_wiring(const NetworkConfig& network) {
  const auto n = static_cast<int>(network.n_parties());
  const int outcomes = network.parties().front().n_outcomes;
  bool uniform = std::all_of(network.parties().begin(), network.parties().end(),
                             [&](const PartySpec& p) { return p.n_outcomes == outcomes; });
  if (n >= 2 && uniform && network == ring_network(n, outcomes)) return ring_wiring(n);
  return auto_wiring(network, std::vector<int>(network.n_sources(), 2));
}

Distribution build_target(const TargetSpec& spec) {
  const auto pure = family_state(spec.state, spec.theta);
  std::vector<SourceState> states;
  for (std::size_t s = 0; s < spec.network.n_sources(); ++s) {
    if (spec.visibility < 1.0)
      states.emplace_back(werner(pure, spec.visibility));
    else
      states.emplace_back(pure);
  }
  const auto povm = family_povm(spec.measurement, spec.u, spec.mu);
  const std::vector<Povm> povms(spec.network.n_parties(), povm);
  auto dist = born_distribution(spec.network, states, povms, spec.wiring ? *spec.wiring : default_wiring(spec.network));
  if (!spec.coarse.empty()) dist = coarse_grain(dist, spec.coarse);
  return dist;
}

nlohmann::ordered_json target_to_json(const TargetSpec& spec) {
  nlohmann::ordered_json j;
  j["network"] = nlohmann::ordered_json::parse(config_to_json(spec.network));
  j["state"] = to_string(spec.state);
  j["theta"] = spec.theta;
  j["visibility"] = spec.visibility;
  j["measurement"] = to_string(spec.measurement);
  j["u"] = spec.u;
  j["mu"] = spec.mu;
  j["wiring"] = (spec.wiring ? *spec.wiring : default_wiring(spec.network)).order();
  j["coarse"] = spec.coarse;
  return j;
}

NetworkConfig coarse_network(const NetworkConfig& network, const std::vector<std::vector<int>>& merges) {
  if (merges.empty()) return network;
  if (merges.size() != network.n_parties()) throw std::invalid_argument("need one merge map per party");
  auto parties = network.parties();
  for (std::size_t i = 0; i < parties.size(); ++i)
    parties[i].n_outcomes = *std::max_element(merges[i].begin(), merges[i].end()) + 1;
  return NetworkConfig(std::move(parties));
}

std::vector<std::vector<int>> parse_coarse(std::string_view groups, const NetworkConfig& network) {
  std::vector<std::vector<int>> maps;
  for (const auto& party : network.parties()) {
    const int o = party.n_outcomes;
    std::vector<int> group_of(static_cast<std::size_t>(o), -1);
    int group = 0;
    for (std::size_t pos = 0; pos <= groups.size(); ++group) {
      const auto end = std::min(groups.find(',', pos), groups.size());
      for (std::size_t k = pos; k < end; ++k) {
        if (!std::isdigit(static_cast<unsigned char>(groups[k])))
          throw std::invalid_argument("coarse-graining groups must be digits separated by commas");
        const int outcome = groups[k] - '0';
        if (outcome >= o) throw std::out_of_range("coarse-graining outcome " + std::to_string(outcome) + " out of range");
        if (group_of[static_cast<std::size_t>(outcome)] != -1)
          throw std::invalid_argument("outcome " + std::to_string(outcome) + " appears in two groups");
        group_of[static_cast<std::size_t>(outcome)] = group;
      }
      pos = end + 1;
    }
    // singleton groups for untouched outcomes, then relabel by smallest member
    for (auto& g : group_of)
      if (g == -1) g = group++;
    std::vector<int> label(static_cast<std::size_t>(group), -1);
    int next = 0;
    std::vector<int> map(static_cast<std::size_t>(o));
    for (int a = 0; a < o; ++a) {
      auto& l = label[static_cast<std::size_t>(group_of[static_cast<std::size_t>(a)])];
      if (l == -1) l = next++;
      map[static_cast<std::size_t>(a)] = l;
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

std::optional<NetworkConfig> named_network(std::string_view name, int outcomes) {
  if (name == "triangle") return ring_network(3, outcomes);
  if (name == "square") return ring_network(4, outcomes);
  if (name == "pentagon") return ring_network(5, outcomes);
  if (name.starts_with("ring")) {
    try {
      return ring_network(std::stoi(std::string(name.substr(4))), outcomes);
    } catch (const std::logic_error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

namespace {

cplx parse_complex(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("complex entries must be [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

CMatrix parse_complex_matrix(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix must be a non-empty array of rows");
  CMatrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != static_cast<std::size_t>(m.cols())) throw std::invalid_argument("matrix rows differ in length");
    for (std::size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_complex(j[r][c]);
  }
  return m;
}

}  // namespace

std::vector<SourceState> parse_raw_states(const nlohmann::json& doc) {
  std::vector<SourceState> out;
  for (const auto& s : doc.at("states")) {
    const auto dims = s.at("dims").get<std::vector<int>>();
    if (s.contains("vector")) {
      const auto& v = s["vector"];
      CVector amp(static_cast<Eigen::Index>(v.size()));
      for (std::size_t k = 0; k < v.size(); ++k) amp[static_cast<Eigen::Index>(k)] = parse_complex(v[k]);
      out.emplace_back(StateVector(std::move(amp), dims));
    } else if (s.contains("matrix")) {
      out.emplace_back(DensityMatrix(parse_complex_matrix(s["matrix"]), dims));
    } else {
      throw std::invalid_argument("raw state needs a \"vector\" or a \"matrix\"");
    }
  }
  return out;
}

std::vector<Povm> parse_raw_povms(const nlohmann::json& doc) {
  std::vector<Povm> out;
  for (const auto& p : doc.at("povms")) {
    std::vector<CMatrix> effects;
    for (const auto& e : p.at("effects")) effects.push_back(parse_complex_matrix(e));
    out.emplace_back(std::move(effects));
  }
  return out;
}

}  // namespace netlocal
