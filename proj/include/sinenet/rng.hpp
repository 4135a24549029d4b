#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sinenet {

/// splitmix64 step; used to derive decorrelated sub-stream seeds.
inline std::uint64_t seed_mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream on top of std::mt19937_64.
///
/// The distribution transforms are fixed here rather than taken from
/// <random> because std::normal_distribution / std::uniform_int_distribution
/// algorithms are implementation-defined; datasets and training runs must be
/// reproducible bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from (seed, stream_id).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(seed_mix(seed_mix(seed) ^ stream_id));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n); rejection sampling, exactly unbiased.
  int uniform_int(int n) {
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % std::uint64_t(n);
    std::uint64_t v = engine_();
    while (v >= bound) v = engine_();
    return int(v % std::uint64_t(n));
  }

  /// Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();  // log(0) guard
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace sinenet
