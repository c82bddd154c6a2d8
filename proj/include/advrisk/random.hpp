#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace advrisk {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a named substream ("train", "attack", "bootstrap", "detector")
// optionally further split by integer keys such as (n, rep).
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ h);
}

template <typename... Keys>
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t key,
                             Keys... rest) noexcept {
  return substream_seed(splitmix64(substream_seed(seed, name) ^ splitmix64(key)), "", rest...);
}

template <typename... Keys>
Rng make_rng(std::uint64_t seed, std::string_view name, Keys... keys) {
  return Rng(substream_seed(seed, name, static_cast<std::uint64_t>(keys)...));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace advrisk
