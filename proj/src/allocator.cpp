#include "fedtoe/allocator.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fedtoe::alloc {

namespace {

struct Prepared {
  int n = 0;
  Vec th;      // effective gain constants at q_max
  Vec a;       // th_i * p_max / n0 (capacity SNR numerator)
  Vec lo;      // minimum bandwidths W_i(1)
  Vec weight;
  double w_ceiling = 0.0;
};

void check_problem(const AllocProblem& prob) {
  if (prob.clients.empty()) throw std::invalid_argument("allocator: no clients");
  if (!(prob.w_total > 0.0)) throw std::invalid_argument("allocator: bandwidth budget must be > 0");
  if (!(prob.p_max > 0.0)) throw std::invalid_argument("allocator: power cap must be > 0");
  if (!(prob.tau_max > 0.0)) throw std::invalid_argument("allocator: deadline must be > 0");
  if (!(prob.q_max > 0.0 && prob.q_max < 1.0))
    throw std::invalid_argument("allocator: target outage must lie in (0, 1)");
  if (!(prob.m >= 1.0) || !(prob.mu >= 0.0))
    throw std::invalid_argument("allocator: need m >= 1 and mu >= 0");
  for (const auto& c : prob.clients) {
    if (!(c.d > 0.0)) throw std::invalid_argument("allocator: client distances must be > 0");
    if (!(c.weight >= 0.0)) throw std::invalid_argument("allocator: weights must be >= 0");
  }
}

Prepared prepare(const AllocProblem& prob) {
  check_problem(prob);
  Prepared pp;
  pp.n = static_cast<int>(prob.clients.size());
  pp.th = Vec(pp.n);
  pp.a = Vec(pp.n);
  pp.lo = Vec(pp.n);
  pp.weight = Vec(pp.n);
  pp.w_ceiling = 1e6 * prob.w_total;
  for (int i = 0; i < pp.n; ++i) {
    pp.th[i] = channel::theta(prob.clients[static_cast<std::size_t>(i)].d, prob.q_max, prob.chan);
    pp.a[i] = pp.th[i] * prob.p_max / prob.chan.n0;
    pp.lo[i] = channel::bandwidth_for_level(1.0, pp.th[i], prob.p_max, prob.chan.n0,
                                            prob.tau_max, prob.m, prob.mu, pp.w_ceiling);
    pp.weight[i] = prob.clients[static_cast<std::size_t>(i)].weight;
  }
  return pp;
}

void check_feasible(const Prepared& pp, const AllocProblem& prob) {
  const double need = pp.lo.sum();
  if (need > prob.w_total * (1.0 + 1e-12))
    throw std::runtime_error(
        "allocator: delay constraint too tight, minimum per-client bandwidths need " +
        std::to_string(need) + " Hz of " + std::to_string(prob.w_total) + " Hz");
}

double level_of(const AllocProblem& prob, const Prepared& pp, int i, double w) {
  return (prob.tau_max * w * std::log2(1.0 + pp.a[i] / w) - prob.mu) / prob.m;
}

// per-client objective piece (unweighted) and its w-derivative, written in
// u = 2^-B so that very large levels underflow to 0 instead of overflowing
double phi(const AllocProblem& prob, const Prepared& pp, int i, double w) {
  const double u = std::exp2(-level_of(prob, pp, i, w));
  const double den = 1.0 - u;
  return u * u / (den * den);
}

double phi_grad(const AllocProblem& prob, const Prepared& pp, int i, double w) {
  const double u = std::exp2(-level_of(prob, pp, i, w));
  const double den = 1.0 - u;
  const double x = pp.a[i] / w;
  const double bracket = x / (1.0 + x) - std::log1p(x);  // < 0 for x > 0
  return 2.0 * prob.tau_max / prob.m * u * u * bracket / (den * den * den);
}

double int_objective(const Prepared& pp, const std::vector<int>& b) {
  double acc = 0.0;
  for (int i = 0; i < pp.n; ++i) {
    const double u = std::exp2(-b[static_cast<std::size_t>(i)]);
    const double den = 1.0 - u;
    acc += pp.weight[i] * u * u / (den * den);
  }
  return acc;
}

Vec init_point(const Prepared& pp, const AllocProblem& prob) {
  Vec w(pp.n);
  const double share = prob.w_total / pp.n;
  for (int i = 0; i < pp.n; ++i) w[i] = std::max(pp.lo[i], share);
  return project_feasible(w, pp.lo, prob.w_total);
}

double residual_at(const AllocProblem& prob, const Prepared& pp, const Vec& w) {
  Vec g(pp.n);
  for (int i = 0; i < pp.n; ++i) g[i] = pp.weight[i] * phi_grad(prob, pp, i, w[i]);
  const double gmax = g.cwiseAbs().maxCoeff();
  if (!(gmax > 0.0)) return 0.0;
  const double t = 1e-3 * (prob.w_total / pp.n) / gmax;
  const Vec moved = project_feasible(w - t * g, pp.lo, prob.w_total);
  return (moved - w).norm() / (t * g.norm() + 1e-300);
}

struct PgdState {
  Vec w;
  double f = 0.0;
  double step = 0.0;
};

// one projected-gradient step with Armijo backtracking; returns displacement.
// An optional guard vetoes trial points (halving the step further); a small
// enough step always reproduces the current point's integer levels, so a
// guard that accepts ties cannot block forever.
double pgd_step(const AllocProblem& prob, const Prepared& pp, PgdState& st,
                const std::function<bool(const Vec&)>& guard = {}) {
  Vec g(pp.n);
  for (int i = 0; i < pp.n; ++i) g[i] = pp.weight[i] * phi_grad(prob, pp, i, st.w[i]);
  const double gmax = g.cwiseAbs().maxCoeff();
  if (!(gmax > 0.0)) return 0.0;
  if (st.step <= 0.0) st.step = (prob.w_total / pp.n) / gmax;
  st.step *= 4.0;  // let the accepted step grow back after earlier backtracking

  for (int bt = 0; bt < 200; ++bt) {
    const Vec trial = project_feasible(st.w - st.step * g, pp.lo, prob.w_total);
    const double ft = objective(prob, trial);
    const double slope = g.dot(trial - st.w);  // <= 0 on the projection arc
    if (ft <= st.f + 1e-4 * slope && (!guard || guard(trial))) {
      const double move = (trial - st.w).norm();
      st.w = trial;
      st.f = ft;
      return move;
    }
    st.step *= 0.5;
  }
  return 0.0;
}

}  // namespace

Vec gain_constants(const AllocProblem& prob) { return prepare(prob).th; }

Vec lower_bounds(const AllocProblem& prob) { return prepare(prob).lo; }

double objective(const AllocProblem& prob, const Vec& w) {
  const Prepared pp = prepare(prob);
  if (w.size() != pp.n) throw std::invalid_argument("allocator: bandwidth vector size mismatch");
  double acc = 0.0;
  for (int i = 0; i < pp.n; ++i) acc += pp.weight[i] * phi(prob, pp, i, w[i]);
  return acc;
}

Vec objective_gradient(const AllocProblem& prob, const Vec& w) {
  const Prepared pp = prepare(prob);
  if (w.size() != pp.n) throw std::invalid_argument("allocator: bandwidth vector size mismatch");
  Vec g(pp.n);
  for (int i = 0; i < pp.n; ++i) g[i] = pp.weight[i] * phi_grad(prob, pp, i, w[i]);
  return g;
}

Vec project_feasible(const Vec& w, const Vec& lower, double w_total) {
  const Index n = w.size();
  if (lower.size() != n) throw std::invalid_argument("projection: size mismatch");
  const double budget = w_total - lower.sum();
  if (budget < -1e-9 * std::max(1.0, w_total))
    throw std::invalid_argument("projection: lower bounds exceed the budget");

  Vec y = w - lower;
  Vec clamped = y.cwiseMax(0.0);
  if (clamped.sum() <= budget) return lower + clamped;

  // active sum constraint: shift the positive part down by a uniform tau
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (y[a] != y[b]) return y[a] > y[b];
    return a < b;
  });
  double prefix = 0.0;
  double tau = 0.0;
  Index active = 0;
  for (Index r = 0; r < n; ++r) {
    const double v = y[order[static_cast<std::size_t>(r)]];
    prefix += v;
    const double cand = (prefix - budget) / static_cast<double>(r + 1);
    if (v - cand > 0.0) {
      tau = cand;
      active = r + 1;
    } else {
      break;
    }
  }
  (void)active;
  Vec out(n);
  for (Index i = 0; i < n; ++i) out[i] = lower[i] + std::max(y[i] - tau, 0.0);
  return out;
}

RelaxedResult solve_relaxed(const AllocProblem& prob, int max_iters, double tol) {
  const Prepared pp = prepare(prob);
  check_feasible(pp, prob);

  PgdState st;
  st.w = init_point(pp, prob);
  st.f = objective(prob, st.w);
  st.step = 0.0;

  RelaxedResult res;
  int calm = 0;
  int it = 0;
  for (; it < max_iters; ++it) {
    const double move = pgd_step(prob, pp, st);
    calm = (move <= tol * prob.w_total) ? calm + 1 : 0;
    if (calm >= 3) break;
    if (it % 16 == 15 && residual_at(prob, pp, st.w) < 1e-10) break;
  }
  res.w = st.w;
  res.objective = st.f;
  res.iterations = it + 1;
  res.residual = residual_at(prob, pp, st.w);
  return res;
}

AllocationSolution solve_offline(const AllocProblem& prob, int max_iters) {
  const Prepared pp = prepare(prob);
  check_feasible(pp, prob);
  const RelaxedResult rel = solve_relaxed(prob);

  auto round_down = [&](const Vec& w, std::vector<int>& b, Vec& w_tight) {
    for (int i = 0; i < pp.n; ++i) {
      const double breal = level_of(prob, pp, i, w[i]);
      const int bi = static_cast<int>(std::floor(breal));
      if (bi < 1)
        throw std::runtime_error(
            "allocator: delay constraint too tight, a client cannot sustain one bit per "
            "coordinate at its bandwidth");
      b[static_cast<std::size_t>(i)] = bi;
      w_tight[i] = channel::bandwidth_for_level(bi, pp.th[i], prob.p_max, prob.chan.n0,
                                                prob.tau_max, prob.m, prob.mu, pp.w_ceiling);
    }
  };

  PgdState st;
  st.w = init_point(pp, prob);
  st.f = objective(prob, st.w);
  st.step = 0.0;

  std::vector<int> best_b(static_cast<std::size_t>(pp.n));
  Vec best_w(pp.n);
  round_down(st.w, best_b, best_w);
  double best_obj = int_objective(pp, best_b);

  AllocationSolution sol;
  sol.rounded_objectives.push_back(best_obj);

  // Each descent step is additionally vetoed when flooring its endpoint
  // would worsen the integer objective, so the rounded objective is
  // nonincreasing by construction and the loop stops at a rounding fixpoint.
  std::vector<int> b(static_cast<std::size_t>(pp.n));
  Vec w_tight(pp.n);
  const auto no_worse = [&](const Vec& trial) {
    round_down(trial, b, w_tight);
    return int_objective(pp, b) <= best_obj * (1.0 + 1e-15);
  };

  std::vector<int> prev_b = best_b;
  int stalled = 0;
  int it = 0;
  for (; it < max_iters; ++it) {
    // start each step from the tightened point of the current levels
    st.w = best_w;
    st.f = objective(prob, st.w);
    if (pgd_step(prob, pp, st, no_worse) <= 0.0) break;
    round_down(st.w, b, w_tight);
    const double obj = int_objective(pp, b);
    sol.rounded_objectives.push_back(obj);
    stalled = (obj >= best_obj * (1.0 - 1e-12)) ? stalled + 1 : 0;
    if (obj <= best_obj) {
      best_obj = obj;
      best_b = b;
      best_w = w_tight;
    }
    if (b == prev_b || stalled >= 2) {
      ++it;
      break;
    }
    prev_b = b;
  }

  sol.iterations = it;
  sol.objective = best_obj;
  sol.relaxed_w = rel.w;
  sol.relaxed_objective = rel.objective;
  sol.residual = rel.residual;
  sol.clients.resize(prob.clients.size());
  for (int i = 0; i < pp.n; ++i) {
    auto& c = sol.clients[static_cast<std::size_t>(i)];
    c.id = prob.clients[static_cast<std::size_t>(i)].id;
    c.d = prob.clients[static_cast<std::size_t>(i)].d;
    c.w = best_w[i];
    c.p = prob.p_max;
    c.b = best_b[static_cast<std::size_t>(i)];
    c.r = channel::rate_cap(c.w, pp.th[i], prob.p_max, prob.chan.n0);
    c.q = channel::outage_prob({c.d, c.p, c.w, c.r}, prob.chan);
    sol.bandwidth_used += c.w;
  }
  return sol;
}

AllocationSolution solve_online(const AllocProblem& prob, const std::vector<int>& positions,
                                const std::vector<double>& position_weights) {
  if (positions.empty()) throw std::invalid_argument("allocator: no sampled positions");
  if (!position_weights.empty() && position_weights.size() != positions.size())
    throw std::invalid_argument("allocator: one weight per sampled position required");
  AllocProblem sub = prob;
  sub.clients.clear();
  sub.clients.reserve(positions.size());
  for (std::size_t j = 0; j < positions.size(); ++j) {
    const int idx = positions[j];
    if (idx < 0 || idx >= static_cast<int>(prob.clients.size()))
      throw std::out_of_range("allocator: sampled position out of range");
    ClientLink c = prob.clients[static_cast<std::size_t>(idx)];
    c.weight = position_weights.empty()
                   ? c.weight / static_cast<double>(positions.size())
                   : position_weights[j];
    sub.clients.push_back(c);
  }
  return solve_offline(sub);
}

ConvexityReport check_convexity(const AllocProblem& prob, int grid_size) {
  if (grid_size < 3) throw std::invalid_argument("allocator: convexity grid too small");
  const Prepared pp = prepare(prob);
  ConvexityReport rep;
  rep.min_rel_second_diff = std::numeric_limits<double>::infinity();
  for (int i = 0; i < pp.n; ++i) {
    const double lo = pp.lo[i];
    const double hi = std::max(prob.w_total, lo * 2.0);
    const double h = (hi - lo) / (grid_size + 1);
    for (int t = 1; t <= grid_size; ++t) {
      const double w = lo + h * t;
      const double fm = phi(prob, pp, i, w - h);
      const double f0 = phi(prob, pp, i, w);
      const double fp = phi(prob, pp, i, w + h);
      const double rel = (fm - 2.0 * f0 + fp) / std::max({std::abs(fm), std::abs(f0),
                                                          std::abs(fp), 1e-300});
      if (rel < rep.min_rel_second_diff) {
        rep.min_rel_second_diff = rel;
        rep.worst_client = i;
        rep.worst_w = w;
      }
    }
  }
  rep.ok = rep.min_rel_second_diff >= -1e-8;
  return rep;
}

OptimalityReport verify_optimality(const AllocationSolution& sol, const AllocProblem& prob) {
  const Prepared pp = prepare(prob);
  OptimalityReport rep;
  auto add = [&rep](const std::string& name, double measured, double tol, bool pass) {
    rep.checks.push_back({name, pass, measured, tol});
  };

  double p_dev = 0.0, q_dev = 0.0, delay_excess = -1.0;
  double w_sum = 0.0;
  int b_min = INT_MAX;
  for (const auto& c : sol.clients) {
    p_dev = std::max(p_dev, std::abs(c.p - prob.p_max));
    // recompute the outage at the stored operating point instead of
    // trusting the solution's own q field
    const double q = channel::outage_prob({c.d, c.p, c.w, c.r}, prob.chan);
    q_dev = std::max(q_dev, std::abs(q - prob.q_max));
    const double bits = prob.m * c.b + prob.mu;
    delay_excess = std::max(delay_excess, bits / c.r / prob.tau_max - 1.0);
    w_sum += c.w;
    b_min = std::min(b_min, c.b);
  }
  add("power_at_cap", p_dev, 0.0, p_dev == 0.0);
  add("outage_at_target", q_dev, 1e-8, q_dev <= 1e-8);
  add("rounded_deadline_feasible", delay_excess, 1e-9, delay_excess <= 1e-9);
  add("bandwidth_budget", w_sum / prob.w_total - 1.0, 1e-12, w_sum <= prob.w_total * (1.0 + 1e-12));
  add("levels_at_least_one", b_min, 1.0, b_min >= 1);

  // deadline tightness of the relaxation: (m*B(w) + mu) / R(w) == tau_max
  double tight_dev = 0.0;
  if (sol.relaxed_w.size() == pp.n) {
    for (int i = 0; i < pp.n; ++i) {
      const double r = channel::rate_cap(sol.relaxed_w[i], pp.th[i], prob.p_max, prob.chan.n0);
      const double bits = prob.m * level_of(prob, pp, i, sol.relaxed_w[i]) + prob.mu;
      tight_dev = std::max(tight_dev, std::abs(bits / r / prob.tau_max - 1.0));
    }
    add("relaxed_deadline_tight", tight_dev, 1e-9, tight_dev <= 1e-9);
    add("relaxed_stationary", sol.residual, 1e-6, sol.residual <= 1e-6);
  } else {
    add("relaxed_deadline_tight", -1.0, 1e-9, false);
    add("relaxed_stationary", -1.0, 1e-6, false);
  }

  rep.all_pass = true;
  for (const auto& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
  return rep;
}

}  // namespace fedtoe::alloc
