#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace rankformer {

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic RNG wrapper. All draws are hand-rolled on top of the raw
// mt19937_64 stream so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent stream from a master seed and a purpose label.
  // Every consumer of randomness in the project gets its own label so one
  // top-level seed controls the whole pipeline.
  static Rng derive(std::uint64_t master, std::string_view label) {
    std::uint64_t s = master ^ fnv1a64(label);
    return Rng(splitmix64(s));
  }
  static Rng derive(std::uint64_t master, std::string_view label, std::uint64_t salt) {
    std::uint64_t s = master ^ fnv1a64(label) ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
    return Rng(splitmix64(s));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform index in [0, n) by rejection.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }

  // Standard normal via Box-Muller; the second value is cached.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace rankformer
