#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dsfl {

/// Deterministic RNG used everywhere in the library.
///
/// mt19937_64 is fully specified by the standard; the distributions below are
/// written out explicitly (std:: distributions are implementation-defined),
/// so the same seed yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    // modulo bias is irrelevant at the range sizes used here
    return lo + static_cast<int64_t>(eng_() % static_cast<uint64_t>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller (two draws per call, no caching).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle (std::shuffle's draw pattern is unspecified).
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derive a substream seed from a base seed and a tag (FNV-1a + splitmix).
  static uint64_t derive(uint64_t seed, std::string_view tag) {
    uint64_t h = 14695981039346656037ull;
    for (char c : tag) {
      h ^= static_cast<uint8_t>(c);
      h *= 1099511628211ull;
    }
    uint64_t z = seed + 0x9e3779b97f4a7c15ull + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 eng_;
};

/// FNV-1a hash of a string; used for order-independent dataset splits.
inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dsfl
