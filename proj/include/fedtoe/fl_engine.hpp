#pragma once

#include <cstdint>
#include <vector>

#include "fedtoe/allocator.hpp"
#include "fedtoe/quantizer.hpp"
#include "fedtoe/scenario.hpp"
#include "fedtoe/types.hpp"

namespace fedtoe::engine {

enum class Scheme {
  FedtoeOffline,  // bandwidth/levels from the offline allocation over all clients
  FedtoeOnline,   // re-allocated each round over the sampled set
  Baseline1,      // uniform bandwidth, fixed levels, aggregation by survivor mean
  Baseline2,      // uniform bandwidth, fixed levels, inverse-propensity aggregation
  Baseline3,      // uniform bandwidth, levels optimized per client
  Ideal,          // no quantization, no outage
};

enum class ChannelMode {
  Bernoulli,  // draw outages from the closed-form probabilities
  Shadowing,  // draw shadowing and compare capacity against the rate
};

struct Seeds {
  std::uint64_t sampling = 1;
  std::uint64_t sgd = 2;
  std::uint64_t quantizer = 3;
  std::uint64_t channel = 4;
};

struct SimConfig {
  int k = 10;
  int e_local = 5;
  int m_rounds = 500;
  double gamma = 0.05;
  int batch = 128;
  Scheme scheme = Scheme::FedtoeOffline;
  Seeds seeds;
  int retransmit_cap = 10000;
  ChannelMode channel_mode = ChannelMode::Bernoulli;
  // On an all-fail round the same payload is re-sent with fresh outage draws
  // by default; optionally each retry re-quantizes the update.
  bool requantize_on_retransmit = false;
  bool lossless = false;  // identity compressor (infinite-level limit)
  int baseline_bits = 5;  // fixed levels for Baselines 1 and 2
  Vec p_hat;              // Baseline 2 selection weights; empty means p
};

// Per-client uplink operating points for one round.
struct LinkPlan {
  Vec w;                 // Hz
  Vec r;                 // bit/s
  Vec q;                 // outage probability
  std::vector<int> bits; // quantization levels
};

struct RoundRecord {
  int round = 0;
  double loss = 0.0;      // global objective at the post-aggregation model
  double grad_sq = 0.0;   // squared norm of the exact global gradient
  int active = 0;         // surviving uploads (= K for Ideal)
  int retransmissions = 0;
  double delay_s = 0.0;   // realized uplink delay including retries
  double bits = 0.0;      // payload bits sent including retries
  double qe_mean = 0.0;   // mean over positions of the per-upload QE bound
  double qe_max = 0.0;    // max over positions of the same
};

struct RunResult {
  std::vector<RoundRecord> rounds;
  double initial_loss = 0.0;
  double initial_grad_sq = 0.0;
  Vec w_final;
  std::vector<Vec> visited;  // w after every round (w_0 first)
  double total_bits = 0.0;
  double total_delay = 0.0;
};

struct Experiment {
  scenario::Task task;
  alloc::AllocProblem link;  // distances, channel, budget, deadline; m/mu
                             // must describe the task's payload
  SimConfig sim;
  Vec w0;
};

// K independent draws from the categorical distribution p (with replacement).
std::vector<int> sample_clients(const Vec& p, int k, RandomStream& rng);

struct LocalUpdate {
  Vec delta;  // accumulated local gradients, (w_before - w_after) / gamma
  std::vector<quant::GroupSpec> groups;
};

LocalUpdate local_train(const scenario::Task& task, int client, const Vec& w0, int e_local,
                        double gamma, int batch, RandomStream& rng);

// Operating points for the schemes with a fixed plan.
LinkPlan plan_fedtoe_offline(const alloc::AllocProblem& link);
LinkPlan plan_uniform_fixed_bits(const alloc::AllocProblem& link, int bits);
LinkPlan plan_uniform_opt_bits(const alloc::AllocProblem& link);

RunResult run(const Experiment& exp);

}  // namespace fedtoe::engine
