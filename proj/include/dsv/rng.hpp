#pragma once

// Seeded RNG with fully specified draw algorithms. std::shuffle and the
// standard distributions are implementation-defined, so everything that
// must reproduce bit-identically across toolchains goes through this.

#include <cstdint>
#include <random>
#include <vector>

namespace dsv {

/// Derives an independent stream seed from (seed, salt); splitmix64 mix.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform01() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Modulo bias is irrelevant at these ranges.
  std::size_t index(std::size_t n) { return n ? std::size_t(gen_() % n) : 0; }

  /// Fisher-Yates with explicit draws; deterministic everywhere.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dsv
