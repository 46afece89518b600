#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace egoqa {

// Deterministic 64-bit generator (splitmix64). Every random choice in the
// toolkit funnels through this type so that a pipeline run is a pure
// function of its configured seed. std::mt19937 + std:: distributions are
// avoided on purpose: distribution output is implementation-defined and
// would break byte-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % bound;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; draws two uniforms per call, cosine branch only, so the
  // stream position does not depend on caller history.
  double normal(double mean, double sigma) {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Child generator with an independent stream.
  Rng split() { return Rng(next_u64()); }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Stable seed derivation for named sub-streams (per scene, per ability,
  // per class, ...). Same (seed, salt) always yields the same stream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    Rng r(seed ^ (salt * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull));
    return r.next_u64();
  }

  static std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ull;
    }
    return h;
  }

 private:
  std::uint64_t state_;
};

}  // namespace egoqa
