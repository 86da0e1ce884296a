#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace selfnorm {

/// SplitMix64 finalizer; used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seedable generator with platform-independent variates.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// derives every variate from raw 64-bit draws instead of the
/// implementation-defined std:: distributions. Replica `r` of an experiment
/// seeded with `s` uses `Rng::for_stream(s, r)`, whose seed is
/// splitmix64(splitmix64(s) ^ splitmix64(r + 1)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape);
  double beta(double a, double b);
  double rademacher() { return (next_u64() >> 63) != 0 ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace selfnorm
