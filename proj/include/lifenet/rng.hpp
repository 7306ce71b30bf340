#pragma once

#include <cstdint>
#include <random>

namespace lifenet {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent random streams drawn from one master seed.
enum class Stream : std::uint64_t {
  init = 1,
  data = 2,
  validation = 3,
  perturbation = 4,
};

/// Derives the seed of one stream from the master seed and a 64-bit key.
///
/// seed = mix64(mix64(key) ^ mix64(master + stream * golden)). For a fixed
/// master seed and stream every step is a bijection of the key, so distinct
/// keys never share a seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t key) {
  const std::uint64_t salt = mix64(master + static_cast<std::uint64_t>(stream) * 0x9e3779b97f4a7c15ULL);
  return mix64(mix64(key) ^ salt);
}

}  // namespace lifenet
