#include "fedtoe/fl_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedtoe/channel.hpp"

namespace fedtoe::engine {

namespace {

void check_sim(const SimConfig& sim) {
  if (sim.k < 1 || sim.e_local < 1 || sim.m_rounds < 1)
    throw std::invalid_argument("engine: k, e_local, m_rounds must be >= 1");
  if (!(sim.gamma > 0.0)) throw std::invalid_argument("engine: learning rate must be > 0");
  if (sim.batch < 1) throw std::invalid_argument("engine: batch size must be >= 1");
  if (sim.retransmit_cap < 1) throw std::invalid_argument("engine: retransmit cap must be >= 1");
}

LinkPlan plan_from_solution(const alloc::AllocationSolution& sol) {
  const int n = static_cast<int>(sol.clients.size());
  LinkPlan plan;
  plan.w = Vec(n);
  plan.r = Vec(n);
  plan.q = Vec(n);
  plan.bits.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& c = sol.clients[static_cast<std::size_t>(i)];
    plan.w[i] = c.w;
    plan.r[i] = c.r;
    plan.q[i] = c.q;
    plan.bits[static_cast<std::size_t>(i)] = c.b;
  }
  return plan;
}

}  // namespace

std::vector<int> sample_clients(const Vec& p, int k, RandomStream& rng) {
  if (k < 1) throw std::invalid_argument("engine: k must be >= 1");
  const Index n = p.size();
  if (n == 0) throw std::invalid_argument("engine: empty weight vector");
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double u = rng.uniform01();
    double acc = 0.0;
    int pick = static_cast<int>(n) - 1;
    for (Index i = 0; i < n; ++i) {
      acc += p[i];
      if (u < acc) {
        pick = static_cast<int>(i);
        break;
      }
    }
    out[static_cast<std::size_t>(j)] = pick;
  }
  return out;
}

LocalUpdate local_train(const scenario::Task& task, int client, const Vec& w0, int e_local,
                        double gamma, int batch, RandomStream& rng) {
  if (e_local < 1) throw std::invalid_argument("engine: e_local must be >= 1");
  Vec w = w0;
  Vec acc = Vec::Zero(task.dim);
  for (int l = 0; l < e_local; ++l) {
    const Vec g = task.stoch_grad(client, w, batch, rng);
    acc += g;
    w -= gamma * g;
  }
  LocalUpdate u;
  u.delta = std::move(acc);
  u.groups = quant::compute_ranges(u.delta, task.groups);
  return u;
}

LinkPlan plan_fedtoe_offline(const alloc::AllocProblem& link) {
  return plan_from_solution(alloc::solve_offline(link));
}

LinkPlan plan_uniform_fixed_bits(const alloc::AllocProblem& link, int bits) {
  if (bits < 1 || bits > quant::kMaxBits)
    throw std::invalid_argument("engine: baseline levels must lie in [1, 32]");
  const int n = static_cast<int>(link.clients.size());
  const double share = link.w_total / n;
  LinkPlan plan;
  plan.w = Vec::Constant(n, share);
  plan.r = Vec(n);
  plan.q = Vec(n);
  plan.bits.assign(static_cast<std::size_t>(n), bits);
  const double payload = link.m * bits + link.mu;
  for (int i = 0; i < n; ++i) {
    plan.r[i] = payload / link.tau_max;
    plan.q[i] = channel::outage_prob(
        {link.clients[static_cast<std::size_t>(i)].d, link.p_max, share, plan.r[i]}, link.chan);
    if (!(plan.q[i] < 1.0))
      throw std::runtime_error("engine: baseline link is in permanent outage (client " +
                               std::to_string(link.clients[static_cast<std::size_t>(i)].id) + ")");
  }
  return plan;
}

LinkPlan plan_uniform_opt_bits(const alloc::AllocProblem& link) {
  const int n = static_cast<int>(link.clients.size());
  const double share = link.w_total / n;
  LinkPlan plan;
  plan.w = Vec::Constant(n, share);
  plan.r = Vec(n);
  plan.q = Vec(n);
  plan.bits.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double th = channel::theta(link.clients[static_cast<std::size_t>(i)].d, link.q_max,
                                     link.chan);
    const double level = channel::quant_level_for_bandwidth(share, th, link.p_max, link.chan.n0,
                                                            link.tau_max, link.m, link.mu);
    const int b = static_cast<int>(std::floor(level));
    if (b < 1)
      throw std::runtime_error(
          "engine: uniform bandwidth cannot sustain one bit per coordinate for client " +
          std::to_string(link.clients[static_cast<std::size_t>(i)].id));
    plan.bits[static_cast<std::size_t>(i)] = b;
    plan.r[i] = channel::rate_cap(share, th, link.p_max, link.chan.n0);
    plan.q[i] = channel::outage_prob(
        {link.clients[static_cast<std::size_t>(i)].d, link.p_max, share, plan.r[i]}, link.chan);
  }
  return plan;
}

RunResult run(const Experiment& exp) {
  check_sim(exp.sim);
  const scenario::Task& task = exp.task;
  const SimConfig& sim = exp.sim;
  if (exp.w0.size() != task.dim) throw std::invalid_argument("engine: w0 size mismatch");
  if (static_cast<int>(exp.link.clients.size()) != task.n_clients &&
      sim.scheme != Scheme::Ideal)
    throw std::invalid_argument("engine: link problem must cover every client");

  const bool ideal = sim.scheme == Scheme::Ideal;
  const bool online = sim.scheme == Scheme::FedtoeOnline;
  const bool ipw = sim.scheme == Scheme::Baseline2;

  LinkPlan plan;  // per client; online scheme replaces it per round (per position)
  if (!ideal && !online) {
    switch (sim.scheme) {
      case Scheme::FedtoeOffline:
        plan = plan_fedtoe_offline(exp.link);
        break;
      case Scheme::Baseline1:
      case Scheme::Baseline2:
        plan = plan_uniform_fixed_bits(exp.link, sim.baseline_bits);
        break;
      case Scheme::Baseline3:
        plan = plan_uniform_opt_bits(exp.link);
        break;
      default:
        break;
    }
  }

  Vec sample_weights = task.p;
  if (ipw && sim.p_hat.size() > 0) {
    if (sim.p_hat.size() != task.p.size())
      throw std::invalid_argument("engine: p_hat must have one entry per client");
    sample_weights = sim.p_hat;
  }

  RunResult res;
  Vec w = exp.w0;
  res.initial_loss = task.loss_fn(w);
  res.initial_grad_sq = task.grad_fn(w).squaredNorm();
  res.visited.push_back(w);
  res.rounds.reserve(static_cast<std::size_t>(sim.m_rounds));

  const int k = sim.k;
  std::vector<Vec> payload(static_cast<std::size_t>(k));
  std::vector<LocalUpdate> updates(static_cast<std::size_t>(k));
  std::vector<char> alive(static_cast<std::size_t>(k));
  std::vector<double> pos_qe(static_cast<std::size_t>(k));

  for (int round = 1; round <= sim.m_rounds; ++round) {
    RandomStream srng(derive_seed(sim.seeds.sampling, {static_cast<std::uint64_t>(round)}));
    const std::vector<int> pos = sample_clients(sample_weights, k, srng);

    // per-position operating points; levels clamp at the quantizer's word
    // size (beyond that the payload is lossless for doubles anyway)
    Vec pw(k), pr(k), pq(k);
    std::vector<int> pbits(static_cast<std::size_t>(k), 0);
    if (online) {
      const alloc::AllocationSolution sol = alloc::solve_online(exp.link, pos);
      for (int j = 0; j < k; ++j) {
        pw[j] = sol.clients[static_cast<std::size_t>(j)].w;
        pr[j] = sol.clients[static_cast<std::size_t>(j)].r;
        pq[j] = sol.clients[static_cast<std::size_t>(j)].q;
        pbits[static_cast<std::size_t>(j)] =
            std::min(sol.clients[static_cast<std::size_t>(j)].b, quant::kMaxBits);
      }
    } else if (!ideal) {
      for (int j = 0; j < k; ++j) {
        const int i = pos[static_cast<std::size_t>(j)];
        pw[j] = plan.w[i];
        pr[j] = plan.r[i];
        pq[j] = plan.q[i];
        pbits[static_cast<std::size_t>(j)] =
            std::min(plan.bits[static_cast<std::size_t>(i)], quant::kMaxBits);
      }
    }

    RoundRecord rec;
    rec.round = round;

    // local training and quantization per sampled position
    for (int j = 0; j < k; ++j) {
      const int i = pos[static_cast<std::size_t>(j)];
      RandomStream grng(derive_seed(sim.seeds.sgd,
                                    {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(j)}));
      updates[static_cast<std::size_t>(j)] =
          local_train(task, i, w, sim.e_local, sim.gamma, sim.batch, grng);
      if (ideal || sim.lossless) {
        payload[static_cast<std::size_t>(j)] = updates[static_cast<std::size_t>(j)].delta;
        pos_qe[static_cast<std::size_t>(j)] = 0.0;
      } else {
        RandomStream qrng(derive_seed(
            sim.seeds.quantizer,
            {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(j), 0}));
        const auto& u = updates[static_cast<std::size_t>(j)];
        payload[static_cast<std::size_t>(j)] =
            quant::dequantize(quant::quantize(u.delta, u.groups, pbits[static_cast<std::size_t>(j)], qrng));
        pos_qe[static_cast<std::size_t>(j)] =
            quant::qe_bound(u.groups, pbits[static_cast<std::size_t>(j)]);
      }
      rec.qe_mean += pos_qe[static_cast<std::size_t>(j)] / k;
      rec.qe_max = std::max(rec.qe_max, pos_qe[static_cast<std::size_t>(j)]);
    }

    // transmission with synchronized retries on all-fail rounds
    int active = k;
    if (!ideal) {
      const double slot_bits = [&] {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += exp.link.m * pbits[static_cast<std::size_t>(j)] + exp.link.mu;
        return s;
      }();
      double slot_delay = 0.0;
      for (int j = 0; j < k; ++j)
        slot_delay = std::max(slot_delay,
                              (exp.link.m * pbits[static_cast<std::size_t>(j)] + exp.link.mu) / pr[j]);
      int attempt = 0;
      while (true) {
        active = 0;
        for (int j = 0; j < k; ++j) {
          RandomStream crng(derive_seed(sim.seeds.channel,
                                        {static_cast<std::uint64_t>(round),
                                         static_cast<std::uint64_t>(j),
                                         static_cast<std::uint64_t>(attempt)}));
          bool out;
          if (sim.channel_mode == ChannelMode::Bernoulli) {
            out = crng.bernoulli(pq[j]);
          } else {
            const int i = pos[static_cast<std::size_t>(j)];
            out = channel::sample_outage(
                {exp.link.clients[static_cast<std::size_t>(i)].d, exp.link.p_max, pw[j], pr[j]},
                exp.link.chan, crng);
          }
          alive[static_cast<std::size_t>(j)] = out ? 0 : 1;
          active += out ? 0 : 1;
        }
        rec.delay_s += slot_delay;
        rec.bits += slot_bits;
        if (active > 0) break;
        ++rec.retransmissions;
        ++attempt;
        if (attempt > sim.retransmit_cap)
          throw std::runtime_error("engine: retransmission cap exceeded at round " +
                                   std::to_string(round));
        if (sim.requantize_on_retransmit && !sim.lossless) {
          for (int j = 0; j < k; ++j) {
            RandomStream qrng(derive_seed(sim.seeds.quantizer,
                                          {static_cast<std::uint64_t>(round),
                                           static_cast<std::uint64_t>(j),
                                           static_cast<std::uint64_t>(attempt)}));
            const auto& u = updates[static_cast<std::size_t>(j)];
            payload[static_cast<std::size_t>(j)] = quant::dequantize(
                quant::quantize(u.delta, u.groups, pbits[static_cast<std::size_t>(j)], qrng));
          }
        }
      }
    } else {
      std::fill(alive.begin(), alive.end(), char{1});
      rec.bits = static_cast<double>(k) * 64.0 * static_cast<double>(task.dim);
    }

    // aggregation: survivor mean, or inverse-propensity weighting over K
    Vec sum = Vec::Zero(task.dim);
    for (int j = 0; j < k; ++j) {
      if (!alive[static_cast<std::size_t>(j)]) continue;
      if (ipw) {
        const int i = pos[static_cast<std::size_t>(j)];
        const double ph = sample_weights[i];
        sum += task.p[i] / (ph * (1.0 - pq[j])) * payload[static_cast<std::size_t>(j)];
      } else {
        sum += payload[static_cast<std::size_t>(j)];
      }
    }
    const double divisor = ipw ? static_cast<double>(k) : static_cast<double>(active);
    w -= sim.gamma * (sum / divisor);

    rec.active = active;
    rec.loss = task.loss_fn(w);
    rec.grad_sq = task.grad_fn(w).squaredNorm();
    res.total_bits += rec.bits;
    res.total_delay += rec.delay_s;
    res.rounds.push_back(rec);
    res.visited.push_back(w);
  }
  res.w_final = w;
  return res;
}

}  // namespace fedtoe::engine
