// Deterministic, platform-independent random streams.
//
// std::uniform_*_distribution is implementation-defined, so every random
// draw in the project goes through these helpers instead. Streams are
// stateless: a draw is a pure function of (seed, stream labels, counter),
// which is what makes scene generation and lidar sampling reproducible
// byte-for-byte across runs and thread schedules.
#pragma once

#include <cstdint>

namespace vcpsim {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive combine: hash_mix(a,b) != hash_mix(b,a).
constexpr std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double u64_to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Counter-based generator. Cheap to fork: fork(label) yields an
// independent stream, so per-agent / per-ray draws never interleave.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // [0, 1)
  double next_unit() { return u64_to_unit(next_u64()); }

  // [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
  }

  Rng fork(std::uint64_t label) const { return Rng(hash_mix(state_, label)); }

 private:
  std::uint64_t state_;
};

}  // namespace vcpsim
