#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace harsanyi {

using Rng = std::mt19937_64;

// Named substreams of a master seed. Each consumer draws from its own
// stream so adding draws in one place never shifts another.
enum class Stream : std::uint64_t {
  kIngestion = 1,
  kInit = 2,
  kShuffle = 3,
  kEstimator = 4,
  kSampleChoice = 5,
  kSynthetic = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(stream)) ^
                    index);
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

// FNV-1a, used to turn estimator names into stable stream indices.
constexpr std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace harsanyi
