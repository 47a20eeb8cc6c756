#include "fedtoe/analysis.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedtoe::stats {

namespace {

void check_weights(const Vec& p, const Vec& q) {
  if (p.size() == 0 || p.size() != q.size())
    throw std::invalid_argument("participation: p and q must be nonempty and equally sized");
  double sum = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::invalid_argument("participation: weights must be positive");
    if (!(q[i] >= 0.0 && q[i] < 1.0))
      throw std::invalid_argument("participation: outage probabilities must lie in [0, 1)");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("participation: weights must sum to 1, got " +
                                std::to_string(sum));
}

double binomial(int n, int v) {
  double c = 1.0;
  for (int t = 1; t <= v; ++t) c *= static_cast<double>(n - v + t) / static_cast<double>(t);
  return c;
}

// 0^0 = 1 so that the all-survive pattern keeps weight 1 when q = 0.
double pow_nonneg(double base, int e) {
  if (e == 0) return 1.0;
  return std::pow(base, e);
}

bool is_uniform(const Vec& q) {
  for (Index i = 1; i < q.size(); ++i)
    if (q[i] != q[0]) return false;
  return true;
}

struct CommonTerms {
  double t;          // M * E
  double k_bar;
  double gamma;
  double opt_gap;
  double sgd_noise;
};

CommonTerms common_terms(const BoundInputs& in, double k_bar) {
  if (in.k < 1 || in.e_local < 1 || in.m_rounds < 1)
    throw std::invalid_argument("bound: k, e_local, m_rounds must be >= 1");
  if (!(in.smooth_l > 0.0)) throw std::invalid_argument("bound: smoothness constant must be > 0");
  if (!(in.batch >= 1.0)) throw std::invalid_argument("bound: batch size must be >= 1");
  if (in.j_sq.rows() != in.m_rounds || in.j_sq.cols() != in.p.size())
    throw std::invalid_argument("bound: j_sq must be m_rounds x N");
  if (in.d_sq.size() != in.p.size())
    throw std::invalid_argument("bound: d_sq must have one entry per client");

  CommonTerms ct;
  ct.t = static_cast<double>(in.m_rounds) * static_cast<double>(in.e_local);
  ct.k_bar = k_bar;
  if (ct.t < std::max(k_bar * k_bar * k_bar, 1.0 / k_bar))
    throw std::invalid_argument("bound: total steps T must be >= max(k_bar^3, 1/k_bar)");
  if (static_cast<double>(in.e_local) > std::pow(ct.t, 0.25) / std::pow(k_bar, 0.75))
    throw std::invalid_argument("bound: local steps exceed the schedule cap T^(1/4)/k_bar^(3/4)");
  ct.gamma = std::sqrt(k_bar) / (8.0 * in.smooth_l * std::sqrt(ct.t));

  const double tk = ct.t * k_bar;
  ct.opt_gap = 496.0 * in.smooth_l * in.f0_minus_fstar / (11.0 * std::sqrt(tk));
  ct.sgd_noise =
      (39.0 / (88.0 * std::sqrt(tk)) + 1.0 / (88.0 * std::pow(tk, 0.75))) * in.sigma_sq / in.batch;
  return ct;
}

BoundBreakdown assemble(const CommonTerms& ct) {
  BoundBreakdown b;
  b.opt_gap = ct.opt_gap;
  b.sgd_noise = ct.sgd_noise;
  b.gamma = ct.gamma;
  b.k_bar = ct.k_bar;
  return b;
}

}  // namespace

ParticipationStats participation_stats_exact(const Vec& p, const Vec& q, int k) {
  check_weights(p, q);
  if (k < 1) throw std::invalid_argument("participation: k must be >= 1");
  const int n = static_cast<int>(p.size());
  const double work = std::pow(static_cast<double>(n), k) * std::ldexp(1.0, k);
  if (work > 1e7)
    throw std::invalid_argument("participation: N^K * 2^K exceeds the enumeration guard (1e7)");

  ParticipationStats st;
  st.beta = Vec::Zero(n);
  st.alpha = Vec::Zero(n);

  std::vector<int> sel(static_cast<std::size_t>(k), 0);
  const unsigned masks = 1u << k;
  while (true) {
    double p_sel = 1.0, q_all = 1.0;
    for (int j = 0; j < k; ++j) {
      p_sel *= p[sel[static_cast<std::size_t>(j)]];
      q_all *= q[sel[static_cast<std::size_t>(j)]];
    }
    const double denom = 1.0 - q_all;  // > 0 since every q < 1
    for (unsigned mask = 1; mask < masks; ++mask) {
      double pr = 1.0;
      for (int j = 0; j < k; ++j) {
        const double qi = q[sel[static_cast<std::size_t>(j)]];
        pr *= (mask >> j & 1u) ? (1.0 - qi) : qi;
      }
      const int v = std::popcount(mask);
      const double w = p_sel * pr / denom;
      for (int j = 0; j < k; ++j)
        if (mask >> j & 1u) {
          st.beta[sel[static_cast<std::size_t>(j)]] += w / v;
          st.alpha[sel[static_cast<std::size_t>(j)]] += w / (static_cast<double>(v) * v);
        }
    }
    int j = 0;
    for (; j < k; ++j) {
      if (++sel[static_cast<std::size_t>(j)] < n) break;
      sel[static_cast<std::size_t>(j)] = 0;
    }
    if (j == k) break;
  }
  st.k_bar = 1.0 / st.alpha.sum();
  return st;
}

ParticipationStatsMc participation_stats_mc(const Vec& p, const Vec& q, int k, long long trials,
                                            RandomStream& rng) {
  check_weights(p, q);
  if (k < 1 || trials < 1) throw std::invalid_argument("participation: k, trials must be >= 1");
  const int n = static_cast<int>(p.size());

  Vec cdf(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += p[i];
    cdf[i] = acc;
  }
  cdf[n - 1] = 1.0;

  Vec bsum = Vec::Zero(n), bsq = Vec::Zero(n), asum = Vec::Zero(n), asq = Vec::Zero(n);
  std::vector<int> draw(static_cast<std::size_t>(k));
  std::vector<bool> alive(static_cast<std::size_t>(k));
  long long kept = 0;
  for (long long t = 0; t < trials; ++t) {
    for (int j = 0; j < k; ++j) {
      const double u = rng.uniform01();
      int i = 0;
      while (cdf[i] <= u) ++i;
      draw[static_cast<std::size_t>(j)] = i;
    }
    // conditioning on >=1 survivor holds the selection fixed and redraws the
    // outage indicators, like the retransmission it models
    int v = 0;
    for (long long attempt = 0; v == 0; ++attempt) {
      if (attempt > 1000000)
        throw std::runtime_error("participation: indicator redraw cap exceeded");
      for (int j = 0; j < k; ++j) {
        const bool ok = !rng.bernoulli(q[draw[static_cast<std::size_t>(j)]]);
        alive[static_cast<std::size_t>(j)] = ok;
        v += ok ? 1 : 0;
      }
    }
    ++kept;
    // the estimates are means of per-trial totals, so the squared sums must
    // square the trial total of a client drawn several times, not each draw
    for (int j = 0; j < k; ++j) {
      if (!alive[static_cast<std::size_t>(j)]) continue;
      const int i = draw[static_cast<std::size_t>(j)];
      bool seen = false;
      for (int j2 = 0; j2 < j && !seen; ++j2)
        seen = alive[static_cast<std::size_t>(j2)] && draw[static_cast<std::size_t>(j2)] == i;
      if (seen) continue;
      int c = 1;
      for (int j2 = j + 1; j2 < k; ++j2)
        if (alive[static_cast<std::size_t>(j2)] && draw[static_cast<std::size_t>(j2)] == i) ++c;
      const double b = static_cast<double>(c) / v;
      const double a = b / v;
      bsum[i] += b;
      bsq[i] += b * b;
      asum[i] += a;
      asq[i] += a * a;
    }
  }
  if (kept == 0) throw std::runtime_error("participation: no surviving rounds in MC run");

  ParticipationStatsMc st;
  st.trials = trials;
  st.kept = kept;
  const double nk = static_cast<double>(kept);
  st.beta = bsum / nk;
  st.alpha = asum / nk;
  st.beta_se = Vec(n);
  st.alpha_se = Vec(n);
  for (int i = 0; i < n; ++i) {
    // per-round contributions include zeros; sums of squares already do
    const double bvar = std::max(0.0, bsq[i] / nk - st.beta[i] * st.beta[i]);
    const double avar = std::max(0.0, asq[i] / nk - st.alpha[i] * st.alpha[i]);
    st.beta_se[i] = std::sqrt(bvar / nk);
    st.alpha_se[i] = std::sqrt(avar / nk);
  }
  st.k_bar = 1.0 / st.alpha.sum();
  return st;
}

double effective_clients_uniform(double q, int k) {
  if (!(q >= 0.0 && q < 1.0))
    throw std::invalid_argument("effective_clients_uniform: q must lie in [0, 1)");
  if (k < 1) throw std::invalid_argument("effective_clients_uniform: k must be >= 1");
  double denom = 0.0;
  for (int v = 1; v <= k; ++v)
    denom += binomial(k, v) * pow_nonneg(1.0 - q, v) * pow_nonneg(q, k - v) / v;
  return (1.0 - pow_nonneg(q, k)) / denom;
}

double chi_square_divergence(const Vec& beta, const Vec& p) {
  if (beta.size() != p.size())
    throw std::invalid_argument("chi_square_divergence: size mismatch");
  double acc = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::invalid_argument("chi_square_divergence: p must be positive");
    const double diff = beta[i] - p[i];
    acc += diff * diff / p[i];
  }
  return acc;
}

BoundBreakdown convergence_bound_general(const BoundInputs& in, const ParticipationStats& st) {
  check_weights(in.p, in.q);
  if (st.beta.size() != in.p.size() || st.alpha.size() != in.p.size())
    throw std::invalid_argument("bound: participation stats do not match client count");
  const CommonTerms ct = common_terms(in, st.k_bar);
  BoundBreakdown b = assemble(ct);

  const double tk = ct.t * ct.k_bar;
  b.qe = 31.0 * std::sqrt(ct.k_bar) / (88.0 * std::pow(ct.t, 1.5)) * (in.j_sq * st.alpha).sum();
  b.hetero_alpha = 31.0 / (22.0 * std::pow(tk, 0.25)) * st.alpha.dot(in.d_sq);
  b.hetero_beta = (4.0 / (11.0 * std::sqrt(tk)) + 1.0 / (22.0 * std::pow(tk, 0.75))) *
                  st.beta.dot(in.d_sq);
  b.skew = 62.0 / 11.0 * chi_square_divergence(st.beta, in.p) * in.p.dot(in.d_sq);

  const double q_max = in.q.maxCoeff();
  const double q_mean = in.p.dot(in.q);
  double spread = 0.0;
  if (!is_uniform(in.q)) {  // identically zero when every q coincides
    for (Index i = 0; i < in.p.size(); ++i) {
      const double dq = in.q[i] - q_mean;
      spread += in.p[i] * dq * dq * in.d_sq[i];
    }
  }
  double pattern = 0.0;
  for (int v = 2; v <= in.k; ++v)
    pattern += pow_nonneg(q_max, in.k - v) * binomial(in.k, v);
  pattern /= 1.0 - pow_nonneg(q_max, in.k);
  b.outage_spread = 31.0 / (22.0 * std::pow(tk, 0.25)) * pattern * spread;

  b.total = b.opt_gap + b.sgd_noise + b.qe + b.hetero_alpha + b.hetero_beta + b.skew +
            b.outage_spread;
  return b;
}

BoundBreakdown convergence_bound_general(const BoundInputs& in) {
  check_weights(in.p, in.q);
  if (is_uniform(in.q)) {
    ParticipationStats st;
    st.k_bar = effective_clients_uniform(in.q[0], in.k);
    st.beta = in.p;
    st.alpha = in.p / st.k_bar;
    return convergence_bound_general(in, st);
  }
  return convergence_bound_general(in, participation_stats_exact(in.p, in.q, in.k));
}

BoundBreakdown convergence_bound_uniform(const BoundInputs& in) {
  check_weights(in.p, in.q);
  if (!is_uniform(in.q))
    throw std::invalid_argument("bound: uniform-outage form requires identical q");
  const double k_bar = effective_clients_uniform(in.q[0], in.k);
  const CommonTerms ct = common_terms(in, k_bar);
  BoundBreakdown b = assemble(ct);

  const double tk = ct.t * k_bar;
  b.qe = 31.0 / (88.0 * std::pow(ct.t, 1.5) * std::sqrt(k_bar)) * (in.j_sq * in.p).sum();
  const double pd = in.p.dot(in.d_sq);
  b.hetero_alpha = 31.0 / (22.0 * std::pow(ct.t, 0.25) * std::pow(k_bar, 1.25)) * pd;
  b.hetero_beta = (4.0 / (11.0 * std::sqrt(tk)) + 1.0 / (22.0 * std::pow(tk, 0.75))) * pd;
  b.total = b.opt_gap + b.sgd_noise + b.qe + b.hetero_alpha + b.hetero_beta;
  return b;
}

BoundBreakdown convergence_bound_uniform_sampled(const BoundInputs& in, const Vec& round_qe) {
  if (round_qe.size() != in.m_rounds)
    throw std::invalid_argument("bound: need one realized QE average per round");
  BoundInputs tmp = in;
  tmp.j_sq = Mat::Zero(in.m_rounds, in.p.size());
  BoundBreakdown b = convergence_bound_uniform(tmp);
  const double k_bar = b.k_bar;
  const double t = static_cast<double>(in.m_rounds) * static_cast<double>(in.e_local);
  b.qe = 31.0 / (88.0 * std::pow(t, 1.5) * std::sqrt(k_bar)) * round_qe.sum();
  b.total += b.qe;
  return b;
}

Schedule schedule_hyperparams(long long t, double k_bar, double smooth_l) {
  if (t < 1 || !(k_bar >= 1.0) || !(smooth_l > 0.0))
    throw std::invalid_argument("schedule: need t >= 1, k_bar >= 1, smoothness > 0");
  const double td = static_cast<double>(t);
  if (td < std::max(k_bar * k_bar * k_bar, 1.0 / k_bar))
    throw std::invalid_argument("schedule: total steps T must be >= max(k_bar^3, 1/k_bar)");
  Schedule s;
  s.gamma = std::sqrt(k_bar) / (8.0 * smooth_l * std::sqrt(td));
  s.e_max = static_cast<long long>(std::floor(std::pow(td, 0.25) / std::pow(k_bar, 0.75)));
  return s;
}

}  // namespace fedtoe::stats
