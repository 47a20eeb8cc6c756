#include "fedtoe/rng.hpp"

#include <cmath>
#include <numbers>

namespace fedtoe {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

double RandomStream::gaussian() {
  const double u1 = uniform01_pos();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1ULL;
  if (range == 0) return static_cast<std::int64_t>(gen_());  // full 64-bit span
  const std::uint64_t reject_above = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x = gen_();
  while (x >= reject_above) x = gen_();
  return lo + static_cast<std::int64_t>(x % range);
}

}  // namespace fedtoe
