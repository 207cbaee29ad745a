#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace netlocal {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based child seed: depends only on the base seed and the path.
constexpr std::uint64_t derive_seed_path(std::uint64_t base, std::span<const std::uint64_t> path) {
  std::uint64_t s = splitmix64(base);
  for (auto p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return derive_seed_path(base, std::span<const std::uint64_t>(path.begin(), path.size()));
}

}  // namespace netlocal
