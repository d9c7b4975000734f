#pragma once

// Every random stream derives from one top-level seed: a component's seed is
// a hash of (component name, parent seed).

#include <cstdint>
#include <string_view>

namespace npi {

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::string_view component, std::uint64_t seed) {
  return splitmix64(fnv1a64(component) ^ splitmix64(seed));
}

inline std::uint64_t derive_seed(std::string_view component, std::uint64_t seed, std::uint64_t index) {
  return splitmix64(derive_seed(component, seed) + splitmix64(index + 1));
}

}  // namespace npi
