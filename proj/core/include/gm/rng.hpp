#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

namespace gm {

// xoshiro256++ seeded through SplitMix64. Self-contained so that sample
// streams are bit-reproducible across platforms and standard libraries.
// Per-trajectory streams come from for_stream(seed, index), which mixes the
// index into the seed before expansion; streams for distinct indices are
// independent for practical purposes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static Rng for_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t m = seed;
    std::uint64_t a = splitmix64(m);
    m ^= stream * 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = splitmix64(m);
    return Rng(a ^ (b + 0x2545f4914f6cdd1dULL * (stream + 1)));
  }

  void reseed(std::uint64_t seed) {
    std::uint64_t m = seed;
    for (auto& w : s_) w = splitmix64(m);
    has_spare_ = false;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1), 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Box-Muller; the spare is cached within the stream
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  int uniform_int(int n) {  // [0, n), n >= 1
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // probs need not be exactly normalized; the last index absorbs roundoff
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gm
