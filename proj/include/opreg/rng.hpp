#pragma once

#include <cstdint>

namespace opreg {

// splitmix64 step; the whole generator is this one mixer so streams are
// portable across platforms and standard-library versions.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic RNG with cheap independent streams derived from
// (seed, stream). Used everywhere randomness is needed so that a single
// seed reproduces every draw bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    // decorrelate (seed, stream) pairs with two mixing rounds
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64_next(s);
    s = a ^ (0xD2B74407B1CE6E93ULL * (stream + 1));
    splitmix64_next(s);
    state_ = s;
  }

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // uniform on [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  int bernoulli(double p) { return uniform01() < p ? 1 : 0; }

  // index in [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n));
  }

 private:
  std::uint64_t state_;
};

}  // namespace opreg
