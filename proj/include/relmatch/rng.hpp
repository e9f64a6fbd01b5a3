#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace relmatch {

/// FNV-1a, stable across platforms (unlike std::hash).
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed and a list of salts.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salts);

/// mt19937_64 with platform-independent derived distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n); n > 0.
  std::size_t uniform_index(std::size_t n);
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// k distinct indices from [0, n) (all of them, in order, when k >= n).
  std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace relmatch
