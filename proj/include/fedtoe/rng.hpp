#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedtoe {

// splitmix64 finalizer; used both as a PRNG seeder and to derive
// independent substream seeds from (base, tag...) tuples.
std::uint64_t mix64(std::uint64_t z);

// Deterministic substream derivation. Streams derived with distinct tag
// tuples are independent for simulation purposes, so per-client/per-round
// results do not depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// Thin deterministic wrapper around mt19937_64. Distribution mappings are
// implemented here (not via std::*_distribution) so that byte-identical
// output depends only on the engine, not on the standard library version.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1], used where log(u) must stay finite
  double uniform01_pos() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller (cosine branch only; one value per call)
  double gaussian();

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  bool bernoulli(double p_true) { return uniform01() < p_true; }

  // uniform integer in [lo, hi], unbiased via rejection
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  std::mt19937_64 gen_;
};

}  // namespace fedtoe
