#pragma once

#include <cstdint>

namespace comet {

/// Counter-based random stream. Every value is a hash of (seed, key, counter),
/// so a stream can be split into independent children by key without sharing
/// state, and draws never depend on thread scheduling.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0, std::uint64_t key = 0) : seed_(seed), key_(key) {}

  std::uint64_t next_u64() { return mix(seed_, key_, counter_++); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // Rejection keeps the draw unbiased; loops at most a few times.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  RandomStream split(std::uint64_t k) const { return RandomStream(seed_, splitmix(key_ ^ splitmix(k + 0x632be59bd9b4e019ULL))); }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t key, std::uint64_t counter) {
    return splitmix(splitmix(seed ^ 0xd1b54a32d192ed03ULL) ^ (splitmix(key) + counter));
  }

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace comet
