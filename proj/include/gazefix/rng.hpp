// Seeded random draws with portable output: the distributions are built by
// hand on top of mt19937_64 so that a given seed reproduces the same stream
// on every platform (std:: distributions are implementation-defined).

#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace gazefix {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint32_t bounded(std::uint32_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<std::uint32_t>(r % n);
  }

  // Zero-mean Gaussian via Box-Muller, pair-cached.
  double gaussian(double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_ * sigma;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2) * sigma;
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stateless per-key standard Gaussian; used for per-pixel image noise so the
// result is independent of pixel visit order and thread count.
inline double hash_gaussian(std::uint64_t key) {
  const std::uint64_t a = splitmix64(key);
  const std::uint64_t b = splitmix64(a);
  double u1 = ((a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  double u2 = (b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace gazefix
