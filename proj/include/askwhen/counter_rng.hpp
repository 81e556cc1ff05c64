#pragma once

#include <cstdint>
#include <string>

namespace askwhen {

// Deterministic counter-based generator. Output n of stream k is a pure
// function mix(k, n), so independent draws need no shared mutable state and
// any (key, counter) pair can be evaluated out of order or in parallel.
// Both the simulator and the permutation resampler draw from this family.

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t counter_mix(std::uint64_t key, std::uint64_t counter) {
  std::uint64_t z = key + counter * 0x9E3779B97F4A7C15ull;
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  explicit CounterRng(const std::string& key) : key_(fnv1a64(key)) {}

  std::uint64_t next_u64() { return counter_mix(key_, counter_++); }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, bound) without modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Single stateless draw: stream `key`, position `counter`, mapped to [0, 1).
inline double uniform_at(const std::string& key, std::uint64_t counter) {
  return double(counter_mix(fnv1a64(key), counter) >> 11) * 0x1.0p-53;
}

}  // namespace askwhen
