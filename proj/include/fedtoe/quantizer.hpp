#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedtoe/rng.hpp"
#include "fedtoe/types.hpp"

namespace fedtoe::quant {

// Knob indices are stored in 32-bit words.
inline constexpr int kMaxBits = 32;

// Contiguous block of coordinates sharing one magnitude range [lower, upper].
// Typical use: one group per model layer.
struct GroupSpec {
  double lower = 0.0;  // min magnitude, >= 0
  double upper = 0.0;  // max magnitude, >= lower
  Index size = 0;      // number of coordinates in the block
};

// Stochastically quantized vector: per coordinate a sign and a knob index.
// Knob u of a group maps to magnitude lower + u*(upper-lower)/(2^bits - 1).
struct QuantizedUpdate {
  std::vector<std::int8_t> sign;     // +1 / -1 (zero encodes as +1)
  std::vector<std::uint32_t> level;  // knob index in [0, 2^bits - 1]
  std::vector<GroupSpec> groups;
  int bits = 1;
};

// Magnitude of knob u.
double knob_value(const GroupSpec& g, int bits, std::uint32_t u);

// Randomized rounding of one coordinate onto the two bracketing knobs.
// The knob below |x| is kept with probability (c_up - |x|) / (c_up - c_lo),
// which makes the reconstruction unbiased. Returns {sign, knob index}.
std::pair<std::int8_t, std::uint32_t> quantize_value(double x, const GroupSpec& g, int bits,
                                                     RandomStream& rng);

double dequantize_value(std::int8_t sign, std::uint32_t level, const GroupSpec& g, int bits);

// Element-wise quantization of v under a group partition (sizes must sum to
// v.size()). Every |v_j| must lie inside its group's range.
QuantizedUpdate quantize(const Vec& v, const std::vector<GroupSpec>& groups, int bits,
                         RandomStream& rng);

Vec dequantize(const QuantizedUpdate& u);

// Per-group [min|v|, max|v|] ranges for a partition given as block sizes.
std::vector<GroupSpec> compute_ranges(const Vec& v, const std::vector<Index>& sizes);

// delta^2 = (1/4) * sum_j (upper_j - lower_j)^2 over coordinates.
double range_spread_sq(const std::vector<GroupSpec>& groups);

// Worst-case expected squared reconstruction error, delta^2 / (2^bits - 1)^2.
double qe_bound(const std::vector<GroupSpec>& groups, int bits);

// Payload size in bits: m quantized magnitudes at `bits` each plus a flat
// overhead `mu` covering signs and range limits.
long long bit_cost(long long m, int bits, long long mu);

// Itemized payload size: one sign bit per coordinate plus per-group range
// limits at b_min/b_max bits each.
long long bit_cost_split(long long m, int bits, int n_min, int n_max, int b_min, int b_max);

}  // namespace fedtoe::quant
