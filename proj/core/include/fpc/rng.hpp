#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fpc {

/// SplitMix64 finalizer. Used to derive independent stream seeds from
/// (master seed, frame id, stage tag, ...) tuples.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// Stage tags keep per-stage streams disjoint.
enum class StreamTag : std::uint64_t {
  scene = 1,
  geometry_noise = 2,
  attribute_noise = 3,
  diffusion_noise = 4,
  training = 5,
  weights = 6,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
  return std::mt19937_64(mix_seed({seed, static_cast<std::uint64_t>(tag), index}));
}

}  // namespace fpc
