#pragma once

#include <cstdint>

namespace diftgame {

// Counter-based RNG streams. A Stream is a SplitMix64 sequence whose initial
// state mixes (master seed, stream index), so trial k of run s always sees the
// same numbers regardless of execution order or platform. Uniform doubles are
// built from the top 53 bits; std::uniform_real_distribution is avoided on
// purpose (its output is implementation-defined).
class Stream {
 public:
  explicit Stream(std::uint64_t state) : state_(state) {}

  static Stream for_index(std::uint64_t master_seed, std::uint64_t index) {
    return Stream(mix(master_seed ^ mix(index + 0x9e3779b97f4a7c15ull)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n >= 1. Rejection-free modulo bias is
  // irrelevant here (n is tiny vs 2^64) but we debias anyway.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

 private:
  std::uint64_t state_;
};

}  // namespace diftgame
