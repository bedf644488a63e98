#pragma once

#include <cstdint>
#include <random>

#include "pflow/common.hpp"

namespace pflow {

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream tags keep RNG consumers decoupled: drawing more samples in one
// stream never shifts another.
enum class RngStream : std::uint64_t {
  ParamInit = 1,
  InitConditions = 2,
  StepNoise = 3,
  DataGen = 4,
  WarmStart = 5,
};

inline std::uint64_t stream_seed(std::uint64_t seed, RngStream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ 0x243F6A8885A308D3ull);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

// mt19937_64 engine with hand-coded transforms; the output depends only on
// the seed, never on the platform's std::*_distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // One pair of independent N(0, sigma^2) samples (Box-Muller).
  Vec2 normal2(double sigma) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {sigma * r * std::cos(kTwoPi * u2), sigma * r * std::sin(kTwoPi * u2)};
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace pflow
