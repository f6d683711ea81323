#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rlhi {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view data);

/// Content hash of a file, or empty string if unreadable.
std::string file_sha256(const std::string& path);

/// 64-bit FNV-1a. Stable across platforms, used for feature hashing and seeds.
constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer; good avalanche for combining integers.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-stage seed derived from the global seed and a stage name.
constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
  return mix64(global_seed ^ fnv1a64(stage));
}

}  // namespace rlhi
