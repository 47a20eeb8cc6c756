#include "fedtoe/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fedtoe/allocator.hpp"
#include "fedtoe/analysis.hpp"
#include "fedtoe/channel.hpp"
#include "fedtoe/fl_engine.hpp"
#include "fedtoe/outputs.hpp"
#include "fedtoe/quantizer.hpp"
#include "fedtoe/rng.hpp"
#include "fedtoe/scenario.hpp"

namespace fedtoe::verify {

namespace {

CheckResult upper(const std::string& name, const std::string& metric, double measured,
                  double tol) {
  return {name, metric, measured, tol, measured <= tol};
}

alloc::AllocProblem small_problem(const config::ExperimentConfig& cfg, int n) {
  alloc::AllocProblem prob;
  prob.chan = cfg.channel;
  prob.q_max = cfg.allocator.q_max;
  prob.tau_max = cfg.allocator.tau_max;
  // budget scaled to the client count so the optimum sits at single-digit
  // levels like the full-size problem
  prob.w_total = 2e5 * n;
  prob.p_max = cfg.allocator.p_max;
  prob.m = 23860;
  prob.mu = 0.0;
  for (int i = 0; i < n; ++i)
    prob.clients.push_back({i, 150.0 + 120.0 * i, 1.0 / n});
  return prob;
}

void quantizer_checks(std::vector<CheckResult>& out, std::uint64_t seed) {
  const int m = 200, bits = 3, draws = 20000;
  RandomStream vrng(derive_seed(seed, {1}));
  Vec v(m);
  for (int i = 0; i < m; ++i) v[i] = 3.0 * vrng.gaussian();
  const std::vector<quant::GroupSpec> groups = quant::compute_ranges(v, {m});
  const double bound = quant::qe_bound(groups, bits);

  Vec mean = Vec::Zero(m), msq = Vec::Zero(m);
  double mse = 0.0;
  RandomStream qrng(derive_seed(seed, {2}));
  for (int t = 0; t < draws; ++t) {
    const Vec err = quant::dequantize(quant::quantize(v, groups, bits, qrng)) - v;
    mean += err;
    msq += err.cwiseProduct(err);
    mse += err.squaredNorm();
  }
  mean /= draws;
  msq /= draws;
  mse /= draws;
  double zmax = 0.0;
  for (int i = 0; i < m; ++i) {
    const double var = std::max(msq[i] - mean[i] * mean[i], 0.0);
    const double se = std::sqrt(var / draws);
    if (se > 0.0) zmax = std::max(zmax, std::abs(mean[i]) / se);
  }
  out.push_back(upper("quantizer_unbiased", "max z-score", zmax, 5.5));
  out.push_back(upper("quantizer_mse_bound", "mse / bound", mse / bound, 1.0));
}

void outage_check(std::vector<CheckResult>& out, const config::ExperimentConfig& cfg,
                  std::uint64_t seed) {
  const double d = 300.0, w = 2e5, p = cfg.allocator.p_max, target = 0.2;
  const double th = channel::theta(d, target, cfg.channel);
  const double r = channel::rate_cap(w, th, p, cfg.channel.n0);
  const double q = channel::outage_prob({d, p, w, r}, cfg.channel);
  const int trials = 200000;
  RandomStream rng(derive_seed(seed, {3}));
  int fails = 0;
  for (int t = 0; t < trials; ++t)
    fails += channel::sample_outage({d, p, w, r}, cfg.channel, rng) ? 1 : 0;
  const double freq = static_cast<double>(fails) / trials;
  const double se = std::sqrt(q * (1.0 - q) / trials);
  out.push_back(upper("outage_closed_form_mc", "z-score", std::abs(freq - q) / se, 4.0));
}

void participation_checks(std::vector<CheckResult>& out, std::uint64_t seed) {
  Vec p(3), q(3);
  p << 0.5, 0.3, 0.2;
  q << 0.1, 0.4, 0.25;
  const int k = 2;
  const auto ex = stats::participation_stats_exact(p, q, k);
  RandomStream rng(derive_seed(seed, {4}));
  const auto mc = stats::participation_stats_mc(p, q, k, 200000, rng);
  double zmax = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (mc.beta_se[i] > 0.0)
      zmax = std::max(zmax, std::abs(mc.beta[i] - ex.beta[i]) / mc.beta_se[i]);
  out.push_back(upper("participation_enum_vs_mc", "max z-score", zmax, 4.0));

  const Vec pu = Vec::Constant(4, 0.25);
  const Vec qu = Vec::Constant(4, 0.3);
  const auto exu = stats::participation_stats_exact(pu, qu, 3);
  const double closed = stats::effective_clients_uniform(0.3, 3);
  out.push_back(
      upper("effective_clients_closed_form", "abs error", std::abs(exu.k_bar - closed), 1e-10));
}

void delay_check(std::vector<CheckResult>& out, std::uint64_t seed) {
  const std::vector<channel::LinkLoad> loads = {{1.2e5, 4e5, 0.3}, {0.8e5, 1.6e5, 0.6}};
  const double closed = channel::avg_uplink_delay(loads);
  double slot = 0.0;
  for (const auto& l : loads) slot = std::max(slot, l.bits / l.rate);
  RandomStream rng(derive_seed(seed, {5}));
  const int episodes = 30000;
  double total = 0.0;
  for (int t = 0; t < episodes; ++t) {
    int attempts = 0;
    bool any = false;
    while (!any) {
      ++attempts;
      for (const auto& l : loads) any = any || !rng.bernoulli(l.q);
    }
    total += attempts * slot;
  }
  const double mc = total / episodes;
  out.push_back(upper("delay_closed_form_mc", "relative error", std::abs(mc - closed) / closed,
                      0.02));
}

void allocator_checks(std::vector<CheckResult>& out, const config::ExperimentConfig& cfg) {
  const alloc::AllocProblem prob3 = small_problem(cfg, 3);
  const Vec lo = alloc::lower_bounds(prob3);
  Vec w = lo * 1.7;

  const Vec g = alloc::objective_gradient(prob3, w);
  double fd_err = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    const double h = 1e-4 * w[i];
    Vec wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    const double fd = (alloc::objective(prob3, wp) - alloc::objective(prob3, wm)) / (2.0 * h);
    fd_err = std::max(fd_err, std::abs(fd - g[i]) / std::max(std::abs(fd), 1e-30));
  }
  out.push_back(upper("allocator_gradient_fd", "max relative error", fd_err, 1e-5));

  const auto curv = alloc::check_convexity(prob3, 60);
  out.push_back(upper("allocator_convexity_fd", "-min normalized curvature",
                      -curv.min_rel_second_diff, 1e-8));

  const alloc::AllocProblem prob2 = small_problem(cfg, 2);
  const Vec lo2 = alloc::lower_bounds(prob2);
  const auto sol = alloc::solve_relaxed(prob2);
  double grid_best = std::numeric_limits<double>::infinity();
  const int steps = 400;
  for (int t = 0; t <= steps; ++t) {
    Vec cand(2);
    cand[0] = lo2[0] + (prob2.w_total - lo2[0] - lo2[1]) * t / steps;
    cand[1] = prob2.w_total - cand[0];
    if (cand[1] < lo2[1]) continue;
    grid_best = std::min(grid_best, alloc::objective(prob2, cand));
  }
  out.push_back(upper("allocator_grid_search", "(pgd - grid) / grid",
                      (sol.objective - grid_best) / grid_best, 1e-6));
}

void consistency_check(std::vector<CheckResult>& out, const config::ExperimentConfig& cfg,
                       const VerifyOptions& opts) {
  const double d = 420.0, w = 180e3;
  const double q_max = cfg.allocator.q_max;
  const auto& chan = cfg.channel;
  const double margin = chan.sigma_db * channel::q_inverse(1.0 - q_max);
  const double th = channel::from_db((opts.inject_theta_sign_error ? -margin : margin) +
                                     chan.k_db - chan.lambda * channel::to_db(d));
  const double r = channel::rate_cap(w, th, cfg.allocator.p_max, chan.n0);
  const double q = channel::outage_prob({d, cfg.allocator.p_max, w, r}, chan);
  out.push_back(upper("outage_rate_consistency", "abs error vs q_max", std::abs(q - q_max), 1e-8));
}

void scenario_check(std::vector<CheckResult>& out, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, {6}));
  const Vec p = Vec::Constant(4, 0.25);
  const auto task = scenario::make_quadratic(6, 0.8, 0.0, p, rng);
  RandomStream wrng(derive_seed(seed, {7}));
  Vec w(6);
  for (int i = 0; i < 6; ++i) w[i] = wrng.gaussian();
  double err = 0.0;
  for (int c = 0; c < 4; ++c) {
    const Vec g = scenario::client_gradient(task, c, w);
    for (int i = 0; i < 6; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(w[i]));
      Vec wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double fd = (scenario::client_loss(task, c, wp) - scenario::client_loss(task, c, wm)) /
                        (2.0 * h);
      err = std::max(err, std::abs(fd - g[i]) / std::max(std::abs(fd), 1.0));
    }
  }
  out.push_back(upper("task_gradient_fd", "max relative error", err, 1e-6));
}

void sampling_check(std::vector<CheckResult>& out, std::uint64_t seed) {
  const Vec p = Vec::Constant(4, 0.25);
  RandomStream rng(derive_seed(seed, {8}));
  const int draws = 200000;
  std::vector<int> count(4, 0);
  const auto picks = engine::sample_clients(p, draws, rng);
  for (int i : picks) ++count[static_cast<std::size_t>(i)];
  double zmax = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double freq = static_cast<double>(count[static_cast<std::size_t>(i)]) / draws;
    const double se = std::sqrt(0.25 * 0.75 / draws);
    zmax = std::max(zmax, std::abs(freq - 0.25) / se);
  }
  out.push_back(upper("sampling_frequencies", "max z-score", zmax, 4.0));
}

}  // namespace

std::vector<CheckResult> run_checks(const config::ExperimentConfig& cfg,
                                    const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  quantizer_checks(out, opts.seed);
  outage_check(out, cfg, opts.seed);
  participation_checks(out, opts.seed);
  delay_check(out, opts.seed);
  allocator_checks(out, cfg);
  consistency_check(out, cfg, opts);
  scenario_check(out, opts.seed);
  sampling_check(out, opts.seed);
  return out;
}

std::string report(const std::vector<CheckResult>& checks) {
  std::ostringstream os;
  int passed = 0;
  for (const auto& c : checks) {
    os << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  " << c.metric << '='
       << out::g12(c.measured) << "  tol=" << out::g12(c.tol) << '\n';
    passed += c.pass ? 1 : 0;
  }
  os << "passed " << passed << '/' << checks.size() << '\n';
  return os.str();
}

bool all_passed(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

}  // namespace fedtoe::verify
