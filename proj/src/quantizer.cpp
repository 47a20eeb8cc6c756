#include "fedtoe/quantizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedtoe::quant {

namespace {


void check_bits(int bits) {
  if (bits < 1 || bits > kMaxBits)
    throw std::invalid_argument("quantizer: bits must be in [1, " + std::to_string(kMaxBits) +
                                "], got " + std::to_string(bits));
}

void check_group(const GroupSpec& g) {
  if (!(g.lower >= 0.0) || !(g.upper >= g.lower))
    throw std::invalid_argument("quantizer: group range must satisfy 0 <= lower <= upper");
  if (g.size < 0) throw std::invalid_argument("quantizer: group size must be nonnegative");
}

double levels_minus_one(int bits) { return std::ldexp(1.0, bits) - 1.0; }

}  // namespace

double knob_value(const GroupSpec& g, int bits, std::uint32_t u) {
  check_bits(bits);
  check_group(g);
  const double n = levels_minus_one(bits);
  if (static_cast<double>(u) > n)
    throw std::out_of_range("quantizer: knob index exceeds 2^bits - 1");
  return g.lower + static_cast<double>(u) * (g.upper - g.lower) / n;
}

std::pair<std::int8_t, std::uint32_t> quantize_value(double x, const GroupSpec& g, int bits,
                                                     RandomStream& rng) {
  check_bits(bits);
  check_group(g);
  const std::int8_t sign = (x < 0.0) ? std::int8_t{-1} : std::int8_t{1};
  double mag = std::abs(x);
  const double slack = 1e-12 * std::max(1.0, g.upper);
  if (mag < g.lower - slack || mag > g.upper + slack)
    throw std::domain_error("quantizer: magnitude " + std::to_string(mag) +
                            " outside group range [" + std::to_string(g.lower) + ", " +
                            std::to_string(g.upper) + "]");
  mag = std::min(std::max(mag, g.lower), g.upper);

  const double n = levels_minus_one(bits);
  const double step = (g.upper - g.lower) / n;
  if (step == 0.0) return {sign, 0};  // degenerate range: exact

  double uf = std::floor((mag - g.lower) / step);
  if (uf > n - 1.0) uf = n - 1.0;
  if (uf < 0.0) uf = 0.0;
  const double c_lo = g.lower + uf * step;
  const double p_up = (mag - c_lo) / step;  // in [0, 1]
  const bool up = rng.uniform01() < p_up;
  return {sign, static_cast<std::uint32_t>(uf) + (up ? 1u : 0u)};
}

double dequantize_value(std::int8_t sign, std::uint32_t level, const GroupSpec& g, int bits) {
  return static_cast<double>(sign) * knob_value(g, bits, level);
}

QuantizedUpdate quantize(const Vec& v, const std::vector<GroupSpec>& groups, int bits,
                         RandomStream& rng) {
  check_bits(bits);
  Index total = 0;
  for (const auto& g : groups) {
    check_group(g);
    total += g.size;
  }
  if (total != v.size())
    throw std::invalid_argument("quantizer: group sizes sum to " + std::to_string(total) +
                                " but vector has " + std::to_string(v.size()) + " coordinates");

  QuantizedUpdate out;
  out.sign.resize(static_cast<std::size_t>(v.size()));
  out.level.resize(static_cast<std::size_t>(v.size()));
  out.groups = groups;
  out.bits = bits;
  const double n = levels_minus_one(bits);
  Index j = 0;
  for (const auto& g : groups) {
    // group constants hoisted out of the coordinate loop; the arithmetic
    // below matches quantize_value exactly, draw for draw
    const double slack = 1e-12 * std::max(1.0, g.upper);
    const double step = (g.upper - g.lower) / n;
    for (Index t = 0; t < g.size; ++t, ++j) {
      const double x = v[j];
      const auto sz = static_cast<std::size_t>(j);
      out.sign[sz] = (x < 0.0) ? std::int8_t{-1} : std::int8_t{1};
      double mag = std::abs(x);
      if (mag < g.lower - slack || mag > g.upper + slack) {
        quantize_value(x, g, bits, rng);  // throws with the full diagnostic
        continue;
      }
      if (step == 0.0) {
        out.level[sz] = 0;
        continue;
      }
      mag = std::min(std::max(mag, g.lower), g.upper);
      double uf = std::floor((mag - g.lower) / step);
      if (uf > n - 1.0) uf = n - 1.0;
      if (uf < 0.0) uf = 0.0;
      const double c_lo = g.lower + uf * step;
      const double p_up = (mag - c_lo) / step;
      const bool up = rng.uniform01() < p_up;
      out.level[sz] = static_cast<std::uint32_t>(uf) + (up ? 1u : 0u);
    }
  }
  return out;
}

Vec dequantize(const QuantizedUpdate& u) {
  Index total = 0;
  for (const auto& g : u.groups) total += g.size;
  if (static_cast<std::size_t>(total) != u.sign.size() || u.sign.size() != u.level.size())
    throw std::invalid_argument("quantizer: inconsistent quantized update sizes");

  Vec out(total);
  const double n = levels_minus_one(u.bits);
  Index j = 0;
  for (const auto& g : u.groups) {
    const double step = (g.upper - g.lower) / n;
    for (Index t = 0; t < g.size; ++t, ++j) {
      const auto sz = static_cast<std::size_t>(j);
      out[j] = static_cast<double>(u.sign[sz]) *
               (g.lower + static_cast<double>(u.level[sz]) * step);
    }
  }
  return out;
}

std::vector<GroupSpec> compute_ranges(const Vec& v, const std::vector<Index>& sizes) {
  Index total = 0;
  for (Index s : sizes) {
    if (s <= 0) throw std::invalid_argument("quantizer: partition blocks must be nonempty");
    total += s;
  }
  if (total != v.size())
    throw std::invalid_argument("quantizer: partition covers " + std::to_string(total) +
                                " of " + std::to_string(v.size()) + " coordinates");

  std::vector<GroupSpec> groups;
  groups.reserve(sizes.size());
  Index j = 0;
  for (Index s : sizes) {
    GroupSpec g;
    g.size = s;
    g.lower = std::abs(v[j]);
    g.upper = g.lower;
    for (Index t = 0; t < s; ++t, ++j) {
      const double mag = std::abs(v[j]);
      g.lower = std::min(g.lower, mag);
      g.upper = std::max(g.upper, mag);
    }
    groups.push_back(g);
  }
  return groups;
}

double range_spread_sq(const std::vector<GroupSpec>& groups) {
  double acc = 0.0;
  for (const auto& g : groups) {
    check_group(g);
    const double r = g.upper - g.lower;
    acc += static_cast<double>(g.size) * r * r;
  }
  return 0.25 * acc;
}

double qe_bound(const std::vector<GroupSpec>& groups, int bits) {
  check_bits(bits);
  const double n = levels_minus_one(bits);
  return range_spread_sq(groups) / (n * n);
}

long long bit_cost(long long m, int bits, long long mu) {
  check_bits(bits);
  if (m < 0 || mu < 0) throw std::invalid_argument("quantizer: negative bit budget inputs");
  return m * bits + mu;
}

long long bit_cost_split(long long m, int bits, int n_min, int n_max, int b_min, int b_max) {
  check_bits(bits);
  if (m < 0 || n_min < 0 || n_max < 0 || b_min < 0 || b_max < 0)
    throw std::invalid_argument("quantizer: negative bit budget inputs");
  return m * (1LL + bits) + static_cast<long long>(n_min) * b_min +
         static_cast<long long>(n_max) * b_max;
}

}  // namespace fedtoe::quant
