#pragma once

#include <cstdint>
#include <utility>

namespace rclab {

// Counter-based RNG (Philox2x64-10). A draw is a pure function of
// (seed, stream, counter), so replicas get disjoint streams and results do
// not depend on thread scheduling. Also usable as a random-access function
// of a bond id, which is how product configurations over huge regions are
// represented without storing them.
namespace philox {

constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ULL;
constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mulhi(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(a) * b) >> 64);
}

inline std::pair<std::uint64_t, std::uint64_t> block(std::uint64_t key,
                                                     std::uint64_t c0,
                                                     std::uint64_t c1) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi = mulhi(c0, kMul);
    std::uint64_t lo = c0 * kMul;
    c0 = hi ^ key ^ c1;
    c1 = lo;
    key += kWeyl;
  }
  return {c0, c1};
}

}  // namespace philox

inline std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
  return philox::block(seed, stream, counter).first;
}

// Uniform double in [0,1) with 53 random bits.
inline double u01(std::uint64_t seed, std::uint64_t stream,
                  std::uint64_t counter) {
  return static_cast<double>(rng_word(seed, stream, counter) >> 11) *
         0x1.0p-53;
}

// Sequential view over one stream.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() { return rng_word(seed_, stream_, counter_++); }

  double next_u01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n) (Lemire rejection).
  std::uint64_t next_below(std::uint64_t n) {
    for (;;) {
      std::uint64_t x = next_u64();
      unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
      auto lo = static_cast<std::uint64_t>(m);
      if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

// 64-bit mix used to derive stream ids from structured keys.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

}  // namespace rclab
