#ifndef IMH_RNG_HPP
#define IMH_RNG_HPP

#include <cmath>
#include <cstdint>

#include "imh/core.hpp"

namespace imh {

/// SplitMix64 stream. Every sampling routine takes an explicit Rng (or a
/// seed from which one is built); there is no global generator. Independent
/// streams come from derive_seed, never from reusing a seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log argument.
  double next_unit_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. Consumes exactly two raw draws, so
  /// streams stay aligned across algorithm variants.
  double next_normal() {
    double u1 = next_unit_pos();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  /// Uniform index in [0, n).
  std::size_t next_index(std::size_t n) {
    auto idx = static_cast<std::size_t>(next_unit() * static_cast<double>(n));
    return idx < n ? idx : n - 1;
  }

 private:
  std::uint64_t state_;
};

/// Pure function of (seed, stream): a decorrelated seed for worker streams,
/// chain replicas, evaluation repetitions.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (0xD1B54A32D192ED03ull * (stream + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace imh

#endif
