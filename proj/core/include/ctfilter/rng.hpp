// Random streams and the seed-splitting rule.
//
// Every random stream in a run is derived from one 64-bit master seed:
//
//   stream_seed(master, trial, stream) =
//       splitmix64(master ^ splitmix64(trial * 0x9E3779B97F4A7C15 + stream))
//
// so trials can execute in any order (or in parallel) and still consume
// identical random numbers.
#pragma once

#include <cstdint>
#include <random>

namespace ctf {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Named streams inside a trial.
enum class Stream : std::uint64_t {
  signal = 1,
  observation = 2,
  filter = 16,  // filter i uses filter + i
};

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial,
                                    std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(trial * 0x9E3779B97F4A7C15ULL + stream));
}

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial, Stream s,
                                    std::uint64_t offset = 0) {
  return stream_seed(master, trial, static_cast<std::uint64_t>(s) + offset);
}

}  // namespace ctf
