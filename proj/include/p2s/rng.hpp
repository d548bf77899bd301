#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace p2s {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Purposes for which a run seed is split into independent sub-seeds.
/// The numeric values are part of the reproducibility contract; do not reorder.
enum class SeedPurpose : std::uint64_t {
  noise = 1,
  weight_init = 2,
  neighbor_pairs = 3,
  ista_dictionary = 4,
  gradcheck = 5,
  phantom = 6,
};

/// Sub-seed derivation: splitmix64 over (root XOR purpose * golden-ratio constant)
/// followed by mixing in the optional cell index. Same inputs, same seed on every platform.
inline std::uint64_t derive_seed(std::uint64_t root, SeedPurpose purpose, std::uint64_t index = 0) {
  std::uint64_t s = root ^ (static_cast<std::uint64_t>(purpose) * 0x9E3779B97F4A7C15ull);
  std::uint64_t out = splitmix64(s);
  s = out ^ index;
  return splitmix64(s);
}

/// xoshiro256** 1.0 seeded through splitmix64. Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in the open interval (0, 1).
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; one value per call, the sine partner is dropped.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Uniform integer in [0, 2^bits) taken from the high bits.
  std::uint64_t top_bits(unsigned bits) { return (*this)() >> (64 - bits); }

  friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
};

}  // namespace p2s
