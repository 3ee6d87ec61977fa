/*
 * Counter-based random streams.
 *
 * Every stream is a pure function of (seed, stream id, counter), so a draw
 * can be reproduced from its indices alone. Parallel code gives each task
 * its own stream id and gets bit-identical output regardless of thread
 * count or scheduling order.
 */
#pragma once

#include <cstdint>

namespace cfx {

// splitmix64 finalizer; full-period mixing of a 64-bit state.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Key for a (seed, stream) pair; the k-th output of the stream is
// mix64(key + k * golden), i.e. splitmix64 with random access.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ (stream * 0xda942042e4dd58b5ULL));
}

inline std::uint64_t stream_bits(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + counter * 0x9e3779b97f4a7c15ULL);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(stream_key(seed, stream)) {}

  // uniform on (0, 1]; never 0 so it is safe under log()
  double uniform() {
    return ((stream_bits(key_, counter_++) >> 11) + 1) * 0x1.0p-53;
  }

  double normal();

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    return stream_bits(key_, counter_++) % n;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace cfx
