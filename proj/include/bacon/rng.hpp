#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "bacon/errors.hpp"

namespace bacon::numerics {

// SplitMix64 (Steele, Lea, Flood 2014). The state advances by the golden
// gamma 0x9E3779B97F4A7C15 and each output is the state passed through the
// finalizer
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z =  z ^ (z >> 31)
// Only 64-bit integer arithmetic is involved, so sequences are identical on
// every platform and easy to reproduce in other languages.
//
// Stream forking: child seed = mix64(seed ^ mix64(stream_id + gamma)), where
// `seed` is the parent's construction seed (not its current position). Forks
// therefore do not depend on how many values the parent has produced.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  Rng fork(std::uint64_t stream_id) const { return Rng(mix64(seed_ ^ mix64(stream_id + kGamma))); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [lo, hi] by rejection (no modulo bias).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw DomainError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
  }

  // Box-Muller, one value per call (the second value is discarded to keep the
  // stream position a simple function of the number of calls).
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// Zero-mean Laplace sample parameterized by its variance; scale b = sqrt(variance / 2).
inline double sample_laplacian(Rng& rng, double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) throw DomainError("sample_laplacian: variance must be > 0");
  const double b = std::sqrt(variance / 2.0);
  const double u = rng.uniform_open() - 0.5;
  return -b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

}  // namespace bacon::numerics
