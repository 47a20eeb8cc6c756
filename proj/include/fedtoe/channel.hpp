#pragma once

#include <vector>

#include "fedtoe/rng.hpp"

namespace fedtoe::channel {

// Large-scale propagation model: gain_dB = k_db - lambda*[d]_dB + psi,
// psi ~ N(0, sigma_db^2). All dB values are power dB (10 log10).
struct ChannelParams {
  double k_db = -31.54;   // antenna/attenuation constant
  double lambda = 3.0;    // path-loss exponent, > 0
  double sigma_db = 3.65; // shadowing std, >= 0
  double n0 = 3.9810717055349565e-21;  // noise PSD, W/Hz (-174 dBm/Hz)
};

// One uplink's operating point. All fields strictly positive.
struct LinkBudget {
  double d;  // distance, m
  double p;  // transmit power, W
  double w;  // bandwidth, Hz
  double r;  // target rate, bit/s
};

double to_db(double x);
double from_db(double x_db);

// Gaussian tail probability, Pr[N(0,1) > x].
double q_function(double x);

// Inverse of q_function on (0, 1); |result| accurate to 1e-10.
double q_inverse(double prob);

// Shannon capacity w*log2(1 + p*gain/(w*n0)) in bit/s.
double capacity(double w, double p, double gain, double n0);

// Closed-form probability that capacity falls below the target rate under
// log-normal shadowing. sigma_db = 0 degenerates to a 0/1 threshold (0 when
// the rate is exactly at capacity).
double outage_prob(const LinkBudget& link, const ChannelParams& params);

// One shadowing draw; true when the link is in outage (capacity < rate).
bool sample_outage(const LinkBudget& link, const ChannelParams& params, RandomStream& rng);

// Effective gain constant at target outage q_max: the gain whose capacity
// the link can sustain with outage probability exactly q_max.
double theta(double d, double q_max, const ChannelParams& params);

// Max sustainable rate at outage q_max: w*log2(1 + theta*p_max/(w*n0)).
double rate_cap(double w, double theta_gain, double p_max, double n0);

// Quantization bits per coordinate transmittable within tau_max seconds:
// (tau_max * rate_cap(w) - mu) / m. Strictly increasing in w.
double quant_level_for_bandwidth(double w, double theta_gain, double p_max, double n0,
                                 double tau_max, double m, double mu);

// Inverse of quant_level_for_bandwidth in w (bisection). Throws when no
// bandwidth below w_ceiling reaches the requested level (the rate cap
// saturates at theta*p_max/(n0*ln 2) as w grows).
double bandwidth_for_level(double b, double theta_gain, double p_max, double n0, double tau_max,
                           double m, double mu, double w_ceiling);

struct LinkLoad {
  double bits;  // payload size
  double rate;  // bit/s
  double q;     // outage probability
};

// Expected per-round uplink delay with synchronized retransmission: the
// slowest upload's airtime divided by the probability that not every link
// fails (geometric retries).
double avg_uplink_delay(const std::vector<LinkLoad>& links);

}  // namespace fedtoe::channel
