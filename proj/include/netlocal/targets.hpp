#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netlocal/quantum.hpp"

namespace netlocal {

enum class StateFamily { PhiPlus, PhiMinus, PsiPlus, PsiMinus, Rotated1, Rotated2 };
enum class MeasurementFamily { Rgb4, Tetra, Computational };

StateFamily parse_state_family(std::string_view name);
MeasurementFamily parse_measurement_family(std::string_view name);
std::string_view to_string(StateFamily f);
std::string_view to_string(MeasurementFamily f);

/// A quantum realization in which every source emits the same (possibly
/// noisy) two-qubit state and every party performs the same measurement.
struct TargetSpec {
  NetworkConfig network;
  StateFamily state = StateFamily::PsiPlus;
  double theta = 0.0;
  double visibility = 1.0;
  MeasurementFamily measurement = MeasurementFamily::Rgb4;
  double u = 1.0;
  double mu = 0.0;
  /// Defaults to ring_wiring for networks built by ring_network, else auto_wiring.
  std::optional<quantum::HilbertWiring> wiring;
  /// Optional per-party outcome merge maps applied after the Born rule.
  std::vector<std::vector<int>> coarse;
};

quantum::StateVector family_state(StateFamily family, double theta);
quantum::Povm family_povm(MeasurementFamily family, double u, double mu);
quantum::HilbertWiring default_wiring(const NetworkConfig& network);

Distribution build_target(const TargetSpec& spec);
nlohmann::ordered_json target_to_json(const TargetSpec& spec);

/// Network whose outcome counts follow the merge maps (unchanged if empty).
NetworkConfig coarse_network(const NetworkConfig& network, const std::vector<std::vector<int>>& merges);

/// "01" merges outcomes 0 and 1; "01,23" merges two groups. New labels follow
/// the smallest old outcome in each group. Same map for every party.
std::vector<std::vector<int>> parse_coarse(std::string_view groups, const NetworkConfig& network);

/// Named networks: triangle, square, pentagon, or ring<n>.
std::optional<NetworkConfig> named_network(std::string_view name, int outcomes = 4);

/// Raw input: {"states": [{"dims": [...], "vector": [[re, im], ...]} or
/// {"dims": [...], "matrix": [[[re, im], ...], ...]}], "povms": [{"effects": [matrix, ...]}]}.
std::vector<quantum::SourceState> parse_raw_states(const nlohmann::json& doc);
std::vector<quantum::Povm> parse_raw_povms(const nlohmann::json& doc);

}  // namespace netlocal
