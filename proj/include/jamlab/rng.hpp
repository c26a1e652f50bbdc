#pragma once

// Seeded random streams. Replication streams are split from a master seed by
// a fixed hash so every (master seed, tag, replication) triple is reproducible
// independently of thread scheduling.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "jamlab/errors.hpp"

namespace jamlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// seed(master, tag, rep) = splitmix64(splitmix64(master ^ fnv1a(tag)) + rep).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t rep) {
  return splitmix64(splitmix64(master ^ fnv1a(tag)) + rep);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw ContractViolation("exponential rate must be positive");
    return -std::log1p(-uniform01()) / rate;
  }

  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw ContractViolation("poisson mean must be nonnegative");
    if (mean == 0.0) return 0;
    std::poisson_distribution<std::uint64_t> p(mean);
    return p(eng_);
  }

  double normal() {
    std::normal_distribution<double> n;
    return n(eng_);
  }

  /// Uniform on {0, ..., n-1}.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ContractViolation("below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do x = eng_();
    while (x >= limit);
    return x % n;
  }

  /// Uniform on {0, ..., n-1} for 128-bit n.
  unsigned __int128 below(unsigned __int128 n) {
    if (n == 0) throw ContractViolation("below(0)");
    if (n <= ~std::uint64_t{0}) return below(static_cast<std::uint64_t>(n));
    int bits = 0;
    for (unsigned __int128 m = n - 1; m; m >>= 1) ++bits;
    const unsigned __int128 mask = bits >= 128 ? ~static_cast<unsigned __int128>(0)
                                                : ((static_cast<unsigned __int128>(1) << bits) - 1);
    for (;;) {
      const unsigned __int128 x = ((static_cast<unsigned __int128>(eng_()) << 64) | eng_()) & mask;
      if (x < n) return x;
    }
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace jamlab
