#pragma once

#include <cstdint>
#include <string_view>

namespace wavedef {

/// splitmix64 finalizer; the standard way to launder correlated seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x517cc1b727220a95ULL));
}

/// Derives an independent stream from a master seed and a label, so every
/// consumer (init, shuffling, attacks, ...) gets its own reproducible RNG.
inline uint64_t seed_stream(uint64_t seed, std::string_view label, uint64_t index = 0) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix_seed(mix_seed(seed, h), index);
}

}  // namespace wavedef
