#include "manifest.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#ifndef NETLOCAL_VERSION
#define NETLOCAL_VERSION "unknown"
#endif

namespace netlocal::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["format"] = "netlocal-manifest";
  j["manifest_version"] = kManifestVersion;
  j["software_version"] = NETLOCAL_VERSION;
  j["subcommand"] = m.subcommand;
  j["argv"] = m.argv;
  j["options"] = m.options;
  j["seed"] = m.seed;
  oj inputs = oj::array();
  for (const auto& p : m.inputs) inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  j["inputs"] = std::move(inputs);
  oj outputs = oj::array();
  for (const auto& p : m.outputs) outputs.push_back(p.string());
  j["outputs"] = std::move(outputs);
  j["status"] = m.status;
  for (const auto& [k, v] : m.extra.items()) j[k] = v;
  return j;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

}  // namespace netlocal::cli
