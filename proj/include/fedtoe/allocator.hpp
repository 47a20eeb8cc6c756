#pragma once

#include <string>
#include <vector>

#include "fedtoe/channel.hpp"
#include "fedtoe/types.hpp"

namespace fedtoe::alloc {

struct ClientLink {
  int id = 0;
  double d = 0.0;       // distance, m
  double weight = 1.0;  // QE weight multiplying 1/(2^B - 1)^2 in the objective
};

// Joint bandwidth / quantization-level allocation instance. Every client
// transmits at p_max with its rate pinned to outage exactly q_max, so the
// only free variables are the bandwidth slices w_i (and through them the
// integer levels B_i).
struct AllocProblem {
  std::vector<ClientLink> clients;
  double w_total = 20e6;  // Hz
  double p_max = 0.2;     // W
  double tau_max = 0.05;  // s, per-round uplink deadline
  double q_max = 0.1;     // target outage
  double m = 23860;       // quantized coordinates per upload
  double mu = 0.0;        // per-upload overhead bits
  channel::ChannelParams chan;
};

struct ClientAllocation {
  int id = 0;
  double d = 0.0;
  double w = 0.0;  // Hz
  double p = 0.0;  // W
  int b = 0;       // quantization bits per coordinate
  double r = 0.0;  // bit/s
  double q = 0.0;  // outage probability at (w, r)
};

struct AllocationSolution {
  std::vector<ClientAllocation> clients;
  double objective = 0.0;  // at the integer levels
  int iterations = 0;
  double bandwidth_used = 0.0;

  // relaxed (pre-rounding) optimum, kept for optimality verification
  Vec relaxed_w;
  double relaxed_objective = 0.0;
  double residual = 0.0;  // scale-free projected-gradient residual

  std::vector<double> rounded_objectives;  // one per solver iteration
};

// Effective gain constants theta_i at the problem's q_max.
Vec gain_constants(const AllocProblem& prob);

// Minimum feasible bandwidths W_i(1) (one bit per coordinate).
Vec lower_bounds(const AllocProblem& prob);

// sum_i weight_i / (2^{B_i(w_i)} - 1)^2 over the relaxation.
double objective(const AllocProblem& prob, const Vec& w);

Vec objective_gradient(const AllocProblem& prob, const Vec& w);

// Euclidean projection onto {w : w >= lower, sum w <= w_total}. Sorting
// based; ties are broken by index so results are deterministic.
Vec project_feasible(const Vec& w, const Vec& lower, double w_total);

struct RelaxedResult {
  Vec w;
  double objective = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

// Projected gradient with backtracking on the relaxation only (no rounding).
RelaxedResult solve_relaxed(const AllocProblem& prob, int max_iters = 4000, double tol = 1e-14);

// Full solver: per iteration one projected-gradient step, integer levels by
// flooring, bandwidth re-tightened to W_i(floor B_i); stops when the integer
// level vector repeats, the rounded objective stalls, or max_iters. Leftover
// bandwidth stays unassigned. The best rounded iterate is returned.
AllocationSolution solve_offline(const AllocProblem& prob, int max_iters = 500);

// Same problem restricted to one round's sampled positions (duplicates get
// independent slices). position_weights defaults to the sampled clients'
// weights divided by the draw count.
AllocationSolution solve_online(const AllocProblem& prob, const std::vector<int>& positions,
                                const std::vector<double>& position_weights = {});

struct ConvexityReport {
  double min_rel_second_diff = 0.0;  // most negative normalized FD curvature
  int worst_client = -1;
  double worst_w = 0.0;
  bool ok = false;
};

// Finite-difference curvature scan of each client's objective piece over its
// feasible bandwidth interval.
ConvexityReport check_convexity(const AllocProblem& prob, int grid_size);

struct OptimalityCheck {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tol = 0.0;
};

struct OptimalityReport {
  std::vector<OptimalityCheck> checks;
  bool all_pass = false;
};

// Post-solve audit: deadline tightness of the relaxation, deadline
// feasibility of the integer solution, outage consistency, budget, power at
// cap, and first-order stationarity of the relaxed point.
OptimalityReport verify_optimality(const AllocationSolution& sol, const AllocProblem& prob);

}  // namespace fedtoe::alloc
