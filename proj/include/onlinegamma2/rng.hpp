#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace onlinegamma2 {

// Counter-based 64-bit generator: output i is a SplitMix64 finalization of seed and i.
// Streams are reproducible across platforms and cheap to fork by seed.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0) : seed_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(seed_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  std::uint64_t counter() const { return counter_; }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1).
  double uniform_open() {
    double u;
    do u = uniform();
    while (u == 0.0);
    return u;
  }

  std::uint64_t below(std::uint64_t bound) {
    // Lemire's multiply-shift with rejection.
    for (;;) {
      __uint128_t m = static_cast<__uint128_t>((*this)()) * bound;
      std::uint64_t lo = static_cast<std::uint64_t>(m);
      if (lo >= (-bound) % bound) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; one sample per call, the partner is discarded.
  double gaussian() {
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Laplace with scale b via the inverse CDF.
  double laplace(double b) {
    double u = uniform_open() - 0.5;
    double s = u < 0 ? -1.0 : 1.0;
    return -b * s * std::log(1.0 - 2.0 * std::abs(u));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace onlinegamma2
