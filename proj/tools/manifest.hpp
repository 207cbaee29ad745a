#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace netlocal::cli {

inline constexpr int kManifestVersion = 1;

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Record of one CLI run; enough to replay it with `netlocal rerun`.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string status = "ok";
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

nlohmann::ordered_json manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

}  // namespace netlocal::cli
