#pragma once

#include <cstdint>

#include "fedtoe/rng.hpp"
#include "fedtoe/types.hpp"

namespace fedtoe::stats {

// Effective per-client aggregation weights induced jointly by K-of-N sampling
// with replacement and per-upload outage, conditioned on at least one upload
// surviving the round.
//   beta_i  = E[ (# surviving draws of i) / (# surviving draws) ]
//   alpha_i = E[ (# surviving draws of i) / (# surviving draws)^2 ]
//   k_bar   = 1 / sum_i alpha_i   (expected effective client count)
struct ParticipationStats {
  Vec beta;
  Vec alpha;
  double k_bar = 0.0;
};

// Exact enumeration over all N^K ordered draws and 2^K - 1 survivor
// patterns. Guarded: N^K * 2^K must not exceed 1e7.
ParticipationStats participation_stats_exact(const Vec& p, const Vec& q, int k);

struct ParticipationStatsMc {
  Vec beta;
  Vec alpha;
  Vec beta_se;   // per-client standard errors of the beta estimates
  Vec alpha_se;
  double k_bar = 0.0;
  long long kept = 0;    // rounds with at least one survivor
  long long trials = 0;
};

// Monte Carlo oracle for the same statistics; all-fail indicator patterns
// are redrawn for the same selection (the conditioning event).
ParticipationStatsMc participation_stats_mc(const Vec& p, const Vec& q, int k, long long trials,
                                            RandomStream& rng);

// Closed form of k_bar when every client has the same outage probability q:
// (1 - q^K) / sum_{v=1..K} (1/v) C(K,v) (1-q)^v q^(K-v). Equals K at q = 0.
double effective_clients_uniform(double q, int k);

// sum_i (beta_i - p_i)^2 / p_i; measures participation skew away from the
// data weights and drives the non-vanishing bias term of the general bound.
double chi_square_divergence(const Vec& beta, const Vec& p);

// Inputs for the convergence-rate bounds. T = m_rounds * e_local.
struct BoundInputs {
  double smooth_l = 1.0;       // gradient Lipschitz constant
  double sigma_sq = 0.0;       // per-sample stochastic gradient variance
  double batch = 1.0;          // mini-batch size
  double f0_minus_fstar = 0.0; // initial optimality gap
  Vec p;                       // data weights, sum to 1
  Vec q;                       // per-client outage probabilities in [0, 1)
  Vec d_sq;                    // per-client squared heterogeneity bounds
  Mat j_sq;                    // m_rounds x N per-round QE bounds
  int k = 1;                   // draws per round
  long long m_rounds = 1;
  long long e_local = 1;
};

// Itemized value of a convergence bound on the average squared gradient.
struct BoundBreakdown {
  double total = 0.0;
  double opt_gap = 0.0;       // initial-gap decay term
  double sgd_noise = 0.0;     // mini-batch variance term
  double qe = 0.0;            // accumulated quantization error term
  double hetero_alpha = 0.0;  // heterogeneity term weighted by alpha
  double hetero_beta = 0.0;   // heterogeneity term weighted by beta
  double skew = 0.0;          // chi-square participation-skew term (bias)
  double outage_spread = 0.0; // outage-variance term (bias)
  double gamma = 0.0;         // step size used
  double k_bar = 0.0;
};

// General bound (non-uniform outage allowed), with participation statistics
// supplied by the caller (exact, closed-form or Monte Carlo).
BoundBreakdown convergence_bound_general(const BoundInputs& in, const ParticipationStats& st);

// Convenience overload: uniform q uses the closed form, otherwise exact
// enumeration (subject to the N^K * 2^K guard).
BoundBreakdown convergence_bound_general(const BoundInputs& in);

// Specialized bound valid only under uniform outage; the two bias terms are
// identically zero and the heterogeneity weights collapse onto p.
BoundBreakdown convergence_bound_uniform(const BoundInputs& in);

// Uniform-outage bound with the QE term evaluated from realized per-round
// selected-set averages (1/K) * sum_{i in S_r} J_ir^2 instead of p-weights.
BoundBreakdown convergence_bound_uniform_sampled(const BoundInputs& in, const Vec& round_qe);

struct Schedule {
  double gamma = 0.0;
  long long e_max = 1;
};

// Step size and local-step cap under which the bounds hold:
// gamma = sqrt(k_bar) / (8 L sqrt(T)), e_max = floor(T^(1/4) / k_bar^(3/4)).
// Requires T >= max(k_bar^3, 1/k_bar).
Schedule schedule_hyperparams(long long t, double k_bar, double smooth_l);

}  // namespace fedtoe::stats
