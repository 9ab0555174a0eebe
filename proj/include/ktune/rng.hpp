#ifndef KTUNE_RNG_HPP
#define KTUNE_RNG_HPP

#include <cstdint>
#include <cmath>
#include <string_view>
#include <vector>

// Deterministic random utilities. Everything in the tuner that consumes
// randomness goes through these so that a run is reproducible bit-for-bit
// from a single root seed, independent of platform and standard library.

namespace ktune {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// Combines two seeds into a new, well-mixed one.
inline std::uint64_t seed_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a + 0x9E3779B97F4A7C15ULL + mix64(b));
}

/// Derives a named stream seed from a root seed. Independent stream names
/// give independent sequences, so e.g. exploration and sampling randomness
/// do not perturb each other across tuner modes.
inline std::uint64_t stream_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return seed_combine(root, h);
}

/// Counter-based hash to [0, 1). Pure function of (seed, counter); used where
/// a value must be recomputable without threading RNG state around.
inline double hash01(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t u = mix64(seed ^ mix64(counter + 0x9E3779B97F4A7C15ULL));
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

/// splitmix64 generator. Small state, splittable via seed_combine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;  // rejection zone for unbiasedness
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace ktune

#endif  // KTUNE_RNG_HPP
