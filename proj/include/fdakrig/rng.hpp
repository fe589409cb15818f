#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fdakrig {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream keyed by (root, keys...). Results depend
/// only on the keys, never on scheduling.
inline std::uint64_t streamSeed(std::uint64_t root, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::mt19937_64 makeStream(std::uint64_t root, std::initializer_list<std::uint64_t> keys) {
  return std::mt19937_64(streamSeed(root, keys));
}

}  // namespace fdakrig
