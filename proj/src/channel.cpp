#include "fedtoe/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fedtoe::channel {

namespace {

void check_params(const ChannelParams& p) {
  if (!(p.lambda > 0.0)) throw std::invalid_argument("channel: path-loss exponent must be > 0");
  if (!(p.sigma_db >= 0.0)) throw std::invalid_argument("channel: shadowing std must be >= 0");
  if (!(p.n0 > 0.0)) throw std::invalid_argument("channel: noise PSD must be > 0");
}

void check_link(const LinkBudget& l) {
  if (!(l.d > 0.0)) throw std::invalid_argument("channel: distance must be > 0");
  if (!(l.p > 0.0))
    throw std::invalid_argument("channel: transmit power must be > 0 (outage is 1 otherwise)");
  if (!(l.w > 0.0))
    throw std::invalid_argument("channel: bandwidth must be > 0 (outage is 1 otherwise)");
  if (!(l.r > 0.0) || !std::isfinite(l.r))
    throw std::invalid_argument("channel: rate must be positive and finite");
}

// 10*log10(2^t - 1), stable for large t where 2^t overflows.
double pow2m1_db(double t) {
  if (t > 50.0) return t * 10.0 * std::log10(2.0);
  return to_db(std::expm1(t * std::numbers::ln2));
}

// dB-domain rate margin: positive means the shadowing must come out above
// its mean for the link to support rate r.
double rate_margin_db(const LinkBudget& l, const ChannelParams& p) {
  return pow2m1_db(l.r / l.w) + to_db(l.w * p.n0) - to_db(l.p) - p.k_db + p.lambda * to_db(l.d);
}

}  // namespace

double to_db(double x) {
  if (!(x > 0.0)) throw std::domain_error("to_db: argument must be > 0");
  return 10.0 * std::log10(x);
}

double from_db(double x_db) { return std::pow(10.0, x_db / 10.0); }

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double q_inverse(double prob) {
  if (!(prob > 0.0 && prob < 1.0))
    throw std::domain_error("q_inverse: probability must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;  // q_function spans (1-eps, eps) over this bracket
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (q_function(mid) > prob)
      lo = mid;  // q_function decreases in x
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double capacity(double w, double p, double gain, double n0) {
  if (!(w > 0.0) || !(p > 0.0) || !(n0 > 0.0) || !(gain > 0.0))
    throw std::invalid_argument("capacity: all inputs must be > 0");
  return w * std::log2(1.0 + p * gain / (w * n0));
}

double outage_prob(const LinkBudget& link, const ChannelParams& params) {
  check_params(params);
  check_link(link);
  const double rho = rate_margin_db(link, params);
  if (params.sigma_db == 0.0) return rho > 0.0 ? 1.0 : 0.0;
  return 1.0 - q_function(rho / params.sigma_db);
}

bool sample_outage(const LinkBudget& link, const ChannelParams& params, RandomStream& rng) {
  check_params(params);
  check_link(link);
  const double psi = params.sigma_db * rng.gaussian();
  const double gain = from_db(params.k_db - params.lambda * to_db(link.d) + psi);
  return capacity(link.w, link.p, gain, params.n0) < link.r;
}

double theta(double d, double q_max, const ChannelParams& params) {
  check_params(params);
  if (!(d > 0.0)) throw std::invalid_argument("theta: distance must be > 0");
  if (!(q_max > 0.0 && q_max < 1.0))
    throw std::invalid_argument("theta: target outage must lie in (0, 1)");
  return from_db(params.sigma_db * q_inverse(1.0 - q_max) + params.k_db -
                 params.lambda * to_db(d));
}

double rate_cap(double w, double theta_gain, double p_max, double n0) {
  return capacity(w, p_max, theta_gain, n0);
}

double quant_level_for_bandwidth(double w, double theta_gain, double p_max, double n0,
                                 double tau_max, double m, double mu) {
  if (!(tau_max > 0.0) || !(m > 0.0) || !(mu >= 0.0))
    throw std::invalid_argument("quant_level_for_bandwidth: need tau_max > 0, m > 0, mu >= 0");
  return (tau_max * rate_cap(w, theta_gain, p_max, n0) - mu) / m;
}

double bandwidth_for_level(double b, double theta_gain, double p_max, double n0, double tau_max,
                           double m, double mu, double w_ceiling) {
  if (!(w_ceiling > 0.0)) throw std::invalid_argument("bandwidth_for_level: bad ceiling");
  auto level = [&](double w) {
    return quant_level_for_bandwidth(w, theta_gain, p_max, n0, tau_max, m, mu);
  };
  if (level(w_ceiling) < b)
    throw std::runtime_error(
        "bandwidth_for_level: requested level unreachable below the bandwidth ceiling "
        "(rate cap saturates); level " +
        std::to_string(b));

  // exponential search down for a lower bracket, then bisection
  double hi = w_ceiling;
  double lo = w_ceiling;
  while (level(lo) >= b) {
    hi = lo;
    lo *= 0.5;
    if (lo < 1e-9) break;  // level -> -mu/m < b as w -> 0
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (level(mid) >= b)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-10 * hi) break;
  }
  return hi;
}

double avg_uplink_delay(const std::vector<LinkLoad>& links) {
  if (links.empty()) throw std::invalid_argument("avg_uplink_delay: no links");
  double slowest = 0.0;
  double all_fail = 1.0;
  for (const auto& l : links) {
    if (!(l.rate > 0.0)) throw std::invalid_argument("avg_uplink_delay: rate must be > 0");
    if (!(l.q >= 0.0 && l.q < 1.0))
      throw std::invalid_argument("avg_uplink_delay: outage must lie in [0, 1)");
    slowest = std::max(slowest, l.bits / l.rate);
    all_fail *= l.q;
  }
  return slowest / (1.0 - all_fail);
}

}  // namespace fedtoe::channel
