#pragma once

#include <cstdint>
#include <string_view>

namespace bridgesim {

/// Counter-based pseudo-random generator (splitmix64 finalizer applied to
/// seed + counter * golden gamma). Every draw is a pure function of
/// (seed, counter), so sequences are bit-identical across platforms and
/// independent of call-site interleaving once the counter is fixed.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() { return value_at(seed_, counter_++); }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n); n must be positive.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  bool bernoulli(double p) { return next_double() < p; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  /// The i-th output of the stream keyed by `seed`.
  static std::uint64_t value_at(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Derives a decorrelated child seed from a parent seed and a stream tag.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return value_at(seed ^ 0xA5A5A5A5A5A5A5A5ULL, stream);
  }

  /// FNV-1a hash of a label, for naming substreams.
  static std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace bridgesim
