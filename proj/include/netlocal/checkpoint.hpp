#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "netlocal/trainer.hpp"

namespace netlocal::localmodel {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "netlocal-checkpoint";

/// Everything needed to resume or inspect a fit.
struct Checkpoint {
  LocalModelNet net;
  SamplingController controller;
  TrainConfig train_config;
  std::optional<TrainResult> result;
};

nlohmann::json to_json(const SamplingController& ctrl);
SamplingController controller_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& tcfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
/// Summary only; the per-iteration history is not stored.
nlohmann::json to_json(const TrainResult& result);
TrainResult train_result_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
/// Rejects unknown formats and newer versions.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace netlocal::localmodel
