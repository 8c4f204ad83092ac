#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace nplm {

// splitmix64 finalizer; used for seeding and stream derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Named sub-streams of a master seed. Every unit of work (toy, repeat, grid
// point, ...) derives its own seed as a pure function of (base, stream, index),
// so results never depend on scheduling or worker count.
enum class Stream : std::uint64_t {
  Centers = 1,
  Toy = 2,
  Resample = 3,
  Perturb = 4,
  SigmaSubsample = 5,
  Partition = 6,
  Repeat = 7,
  Probe = 8,
  Sample = 9,
};

inline std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s =
      mix64(base ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(stream) + 1)));
  return mix64(s ^ (0xd1b54a32d192ed03ull * (index + 1)));
}

// xoshiro256++ seeded through splitmix64. Self-contained so that streams are
// reproducible across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s = mix64(s);
      word = s;
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform double in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n), Lemire's method
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // standard normal via Box-Muller (cosine branch, stateless)
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692528676655900577 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_;
};

}  // namespace nplm
