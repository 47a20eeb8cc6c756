#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "fedtoe/rng.hpp"

using fedtoe::RandomStream;
using fedtoe::derive_seed;
using fedtoe::mix64;

TEST_CASE("same seed reproduces the stream exactly") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RandomStream c(42), d(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.gaussian() == d.gaussian());
  }
}

TEST_CASE("different seeds give different streams") {
  RandomStream a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++same;
  }
  CHECK(same == 0);
}

TEST_CASE("mix64 is a bijection-grade scrambler on small inputs") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 4096; ++i) seen.insert(mix64(i));
  CHECK(seen.size() == 4096);
  CHECK(mix64(0) != 0);
}

TEST_CASE("derive_seed separates substreams by tag, order, and base") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 50; ++r) {
    for (std::uint64_t j = 0; j < 50; ++j) {
      seen.insert(derive_seed(7, {r, j}));
    }
  }
  CHECK(seen.size() == 2500);
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, {1, 2}) != derive_seed(8, {1, 2}));
  CHECK(derive_seed(7, {1}) != derive_seed(7, {1, 0}));
  CHECK(derive_seed(7, {5}) == derive_seed(7, {5}));
}

TEST_CASE("derived substreams are statistically unrelated") {
  // correlation between streams (base, {i}) and (base, {i+1})
  const int n = 20000;
  RandomStream a(derive_seed(123, {0}));
  RandomStream b(derive_seed(123, {1}));
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    double x = a.uniform01(), y = b.uniform01();
    sx += x; sy += y; sxy += x * y; sxx += x * x; syy += y * y;
  }
  double cov = sxy / n - (sx / n) * (sy / n);
  double vx = sxx / n - (sx / n) * (sx / n);
  double vy = syy / n - (sy / n) * (sy / n);
  double corr = cov / std::sqrt(vx * vy);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform01 stays in [0,1) with the right moments") {
  RandomStream rng(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  // se(mean) = sqrt(1/12/n); var of a U(0,1) sample variance ~ 1/180/n
  CHECK(std::abs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(var - 1.0 / 12.0) < 4.0 * std::sqrt(1.0 / 180.0 / n));
}

TEST_CASE("uniform01_pos never returns zero") {
  RandomStream rng(12);
  for (int i = 0; i < 100000; ++i) {
    double u = rng.uniform01_pos();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
  }
}

TEST_CASE("uniform(lo,hi) respects its interval") {
  RandomStream rng(13);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform(-3.0, 5.0);
    REQUIRE(u >= -3.0);
    REQUIRE(u < 5.0);
  }
}

TEST_CASE("gaussian has standard-normal moments") {
  RandomStream rng(14);
  const int n = 400000;
  double s = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian();
    s += g; s2 += g * g; s3 += g * g * g; s4 += g * g * g * g;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  double skew = s3 / n;
  double kurt = s4 / n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));      // se = 1/sqrt(n)
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));                // se = sqrt(2/n)
  CHECK(std::abs(skew) < 4.0 * std::sqrt(15.0 / n));                    // E[g^6] = 15
  CHECK(std::abs(kurt - 3.0) < 4.0 * std::sqrt(96.0 / n));              // var(g^4) = 105 - 9
}

TEST_CASE("gaussian(mean,stddev) shifts and scales") {
  RandomStream rng(15);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian(2.0, 3.0);
    s += g; s2 += g * g;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  CHECK(std::abs(mean - 2.0) < 4.0 * 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 9.0) < 4.0 * 9.0 * std::sqrt(2.0 / n));
}

TEST_CASE("bernoulli hits its probability") {
  RandomStream rng(16);
  const int n = 200000;
  for (double p : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += rng.bernoulli(p) ? 1 : 0;
    double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(hits) / n - p) <= 4.0 * se + 1e-12);
  }
}

TEST_CASE("uniform_int covers the closed range uniformly") {
  RandomStream rng(17);
  const int n = 120000;
  std::vector<int> counts(6, 0);
  for (int i = 0; i < n; ++i) {
    std::int64_t v = rng.uniform_int(10, 15);
    REQUIRE(v >= 10);
    REQUIRE(v <= 15);
    counts[static_cast<int>(v - 10)]++;
  }
  double expect = n / 6.0;
  double se = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
  for (int c : counts) CHECK(std::abs(c - expect) < 5.0 * se);

  CHECK(rng.uniform_int(3, 3) == 3);
}
