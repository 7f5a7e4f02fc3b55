#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace segprop {

// Deterministic random stream used by every randomized operation.
//
// Generator: std::mt19937_64 (fully specified by the standard, so the raw
// 64-bit sequence is identical on every conforming platform). Streams are
// split by seeding with splitmix64(seed ^ splitmix64(stream)), so "epoch 3 of
// seed 42" is reproducible independently of how many numbers other streams
// consumed. The distribution helpers below are written out instead of using
// <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace segprop
