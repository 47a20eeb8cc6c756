#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedtoe/allocator.hpp"
#include "fedtoe/analysis.hpp"
#include "fedtoe/config.hpp"
#include "fedtoe/fl_engine.hpp"
#include "fedtoe/outputs.hpp"
#include "fedtoe/rng.hpp"
#include "fedtoe/scenario.hpp"
#include "fedtoe/verify.hpp"

namespace fs = std::filesystem;
using namespace fedtoe;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string scheme_filter;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config file (defaults apply if omitted)");
  cmd->add_option("--out", c.out_dir, "output directory");
  cmd->add_option("--seed", c.seed, "master seed override")->each([&](const std::string&) {
    c.seed_set = true;
  });
  cmd->add_option("--scheme", c.scheme_filter, "run only the named scheme");
}

config::ExperimentConfig load(const Common& c) {
  config::ExperimentConfig cfg =
      c.config_path.empty() ? config::ExperimentConfig{} : config::parse_file(c.config_path);
  if (c.seed_set) {
    cfg.scenario.seed = c.seed;
    cfg.seeds.sampling = derive_seed(c.seed, {11});
    cfg.seeds.sgd = derive_seed(c.seed, {12});
    cfg.seeds.quantizer = derive_seed(c.seed, {13});
    cfg.seeds.channel = derive_seed(c.seed, {14});
  }
  if (!c.out_dir.empty()) cfg.output.dir = c.out_dir;
  if (!c.scheme_filter.empty()) cfg.sim.schemes = {c.scheme_filter};
  return cfg;
}

engine::Scheme scheme_from_name(const std::string& s) {
  if (s == "fedtoe-offline") return engine::Scheme::FedtoeOffline;
  if (s == "fedtoe-online") return engine::Scheme::FedtoeOnline;
  if (s == "baseline1") return engine::Scheme::Baseline1;
  if (s == "baseline2") return engine::Scheme::Baseline2;
  if (s == "baseline3") return engine::Scheme::Baseline3;
  if (s == "ideal") return engine::Scheme::Ideal;
  throw std::runtime_error("unknown scheme '" + s +
                           "' (fedtoe-offline, fedtoe-online, baseline1, baseline2, baseline3, "
                           "ideal)");
}

struct Built {
  scenario::Task task;
  alloc::AllocProblem prob;
  std::shared_ptr<scenario::QuadraticTask> quad;  // set for the quadratic task
  Vec d;
};

Built build(const config::ExperimentConfig& cfg) {
  const auto& sc = cfg.scenario;
  Built b;
  RandomStream prng(derive_seed(sc.seed, {1}));
  b.d = scenario::place_clients(sc.n, sc.radius, prng);

  RandomStream trng(derive_seed(sc.seed, {2}));
  if (sc.task == "quadratic") {
    const Vec p = Vec::Constant(sc.n, 1.0 / sc.n);
    auto quad = std::make_shared<scenario::QuadraticTask>(
        scenario::make_quadratic(sc.dim, sc.heterogeneity, sc.noise_std, p, trng));
    b.quad = quad;
    b.task = scenario::as_task(*quad);
  } else {
    b.task = scenario::as_task(scenario::make_logistic_noniid(
        b.d, sc.classes, sc.classes_per_client, sc.samples_per_client, sc.feature_dim,
        sc.blob_spread, trng));
  }

  const auto& al = cfg.allocator;
  b.prob.w_total = al.w_total;
  b.prob.p_max = al.p_max;
  b.prob.tau_max = al.tau_max;
  b.prob.q_max = al.q_max;
  b.prob.chan = cfg.channel;
  b.prob.m = al.m > 0 ? al.m : static_cast<double>(b.task.dim);
  const double n_groups = static_cast<double>(b.task.groups.size());
  b.prob.mu = al.mu >= 0.0 ? al.mu : b.prob.m + n_groups * (al.b_min + al.b_max);
  for (int i = 0; i < sc.n; ++i) b.prob.clients.push_back({i, b.d[i], b.task.p[i]});
  return b;
}

engine::SimConfig sim_config(const config::ExperimentConfig& cfg, engine::Scheme scheme) {
  engine::SimConfig sim;
  sim.k = cfg.sim.k;
  sim.e_local = cfg.sim.e_local;
  sim.m_rounds = cfg.sim.m_rounds;
  sim.gamma = cfg.sim.gamma;
  sim.batch = cfg.sim.batch;
  sim.scheme = scheme;
  sim.seeds = {cfg.seeds.sampling, cfg.seeds.sgd, cfg.seeds.quantizer, cfg.seeds.channel};
  sim.retransmit_cap = cfg.sim.retransmit_cap;
  sim.channel_mode = cfg.sim.channel_mode == "shadowing" ? engine::ChannelMode::Shadowing
                                                         : engine::ChannelMode::Bernoulli;
  sim.requantize_on_retransmit = cfg.sim.requantize_on_retransmit;
  sim.baseline_bits = cfg.sim.baseline_bits;
  return sim;
}

int cmd_allocate(const Common& c) {
  const auto cfg = load(c);
  const Built b = build(cfg);
  alloc::AllocationSolution sol;
  try {
    sol = alloc::solve_offline(b.prob);
  } catch (const std::exception& e) {
    double need = 0.0;
    bool have_need = false;
    try {
      need = alloc::lower_bounds(b.prob).sum();
      have_need = true;
    } catch (const std::exception&) {
    }
    std::cerr << "allocate: " << e.what() << '\n';
    if (have_need)
      std::cerr << "allocate: minimum feasible bandwidth sum " << out::g12(need) << " Hz vs "
                << out::g12(b.prob.w_total) << " Hz available\n";
    return 1;
  }
  fs::create_directories(cfg.output.dir);
  out::write_text(cfg.output.dir + "/allocation.csv", out::allocation_csv(sol));
  std::cout << "objective=" << out::g12(sol.objective) << " iterations=" << sol.iterations
            << " bandwidth_used=" << out::g12(sol.bandwidth_used) << '\n';
  return 0;
}

int run_schemes(const config::ExperimentConfig& cfg, const Built& b,
                std::vector<std::pair<std::string, engine::RunResult>>& runs) {
  for (const auto& name : cfg.sim.schemes) {
    engine::Experiment ex;
    ex.task = b.task;
    ex.link = b.prob;
    ex.sim = sim_config(cfg, scheme_from_name(name));
    ex.w0 = Vec::Zero(b.task.dim);
    runs.emplace_back(name, engine::run(ex));
  }
  return 0;
}

void write_run_artifacts(const config::ExperimentConfig& cfg,
                         const std::vector<std::pair<std::string, engine::RunResult>>& runs) {
  fs::create_directories(cfg.output.dir);
  std::string jsonl;
  std::vector<std::pair<std::string, const engine::RunResult*>> refs;
  std::vector<out::Series> loss, grad;
  for (const auto& [name, res] : runs) {
    jsonl += out::rounds_jsonl(name, res);
    refs.emplace_back(name, &res);
    out::Series ls{name, {res.initial_loss}}, gs{name, {res.initial_grad_sq}};
    for (const auto& r : res.rounds) {
      ls.y.push_back(r.loss);
      gs.y.push_back(r.grad_sq);
    }
    loss.push_back(std::move(ls));
    grad.push_back(std::move(gs));
  }
  out::write_text(cfg.output.dir + "/rounds.jsonl", jsonl);
  out::write_text(cfg.output.dir + "/summary.csv", out::summary_csv(refs));
  if (cfg.output.svg) out::write_text(cfg.output.dir + "/curves.svg", out::curves_svg(loss, grad));
}

int cmd_simulate(const Common& c) {
  const auto cfg = load(c);
  const Built b = build(cfg);
  std::vector<std::pair<std::string, engine::RunResult>> runs;
  run_schemes(cfg, b, runs);
  write_run_artifacts(cfg, runs);
  for (const auto& [name, res] : runs)
    std::cout << name << ": rounds=" << res.rounds.size()
              << " final_loss=" << out::g12(res.rounds.back().loss)
              << " final_grad_sq=" << out::g12(res.rounds.back().grad_sq) << '\n';
  return 0;
}

int cmd_bound(const Common& c, const std::string& rounds_path) {
  const auto cfg = load(c);
  const Built b = build(cfg);
  if (!b.quad)
    throw std::runtime_error(
        "bound: closed-form constants are only available for the quadratic task");
  const auto& quad = *b.quad;

  stats::BoundInputs in;
  in.smooth_l = quad.smooth_l;
  in.sigma_sq = quad.sigma_sq;
  in.batch = cfg.sim.batch;
  const Vec w0 = Vec::Zero(b.task.dim);
  in.f0_minus_fstar = scenario::loss(quad, w0) - quad.f_star;
  in.p = b.task.p;
  in.k = cfg.sim.k;
  in.e_local = cfg.sim.e_local;

  const auto sol = alloc::solve_offline(b.prob);
  in.q = Vec(b.task.n_clients);
  for (int i = 0; i < b.task.n_clients; ++i) in.q[i] = sol.clients[static_cast<std::size_t>(i)].q;
  // the allocation pins every link to the same target; snap away the solver's
  // sub-1e-8 jitter so the closed-form participation statistics apply
  if ((in.q.maxCoeff() - in.q.minCoeff()) < 1e-6) in.q.setConstant(in.q.mean());

  const double radius = 2.0 * (w0 - quad.opt_w).norm();
  in.d_sq = scenario::heterogeneity_bounds(quad, w0, radius).ball_max;

  // per-round QE from recorded rounds when available, otherwise a fresh run
  std::vector<double> round_qe;
  std::string src = rounds_path;
  if (src.empty() && fs::exists(cfg.output.dir + "/rounds.jsonl"))
    src = cfg.output.dir + "/rounds.jsonl";
  if (!src.empty()) {
    std::ifstream f(src);
    if (!f) throw std::runtime_error("bound: cannot open '" + src + "'");
    std::string line, want;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const std::string sch = j.at("scheme").get<std::string>();
      if (want.empty()) want = c.scheme_filter.empty() ? sch : c.scheme_filter;
      if (sch != want) continue;
      round_qe.push_back(j.at("qe_max").get<double>());
    }
    if (round_qe.empty()) throw std::runtime_error("bound: no usable rounds in '" + src + "'");
  } else {
    config::ExperimentConfig one = cfg;
    one.sim.schemes = {cfg.sim.schemes.front()};
    std::vector<std::pair<std::string, engine::RunResult>> runs;
    run_schemes(one, b, runs);
    for (const auto& r : runs.front().second.rounds) round_qe.push_back(r.qe_max);
  }
  in.m_rounds = static_cast<long long>(round_qe.size());
  in.j_sq = Mat(in.m_rounds, b.task.n_clients);
  for (long long r = 0; r < in.m_rounds; ++r)
    in.j_sq.row(r).setConstant(round_qe[static_cast<std::size_t>(r)]);

  const auto terms = stats::convergence_bound_general(in);
  fs::create_directories(cfg.output.dir);
  out::write_text(cfg.output.dir + "/bound_terms.csv", out::bound_terms_csv(terms));
  std::cout << "total=" << out::g12(terms.total) << " gamma=" << out::g12(terms.gamma)
            << " k_bar=" << out::g12(terms.k_bar) << '\n';
  return 0;
}

int cmd_verify(const Common& c, bool inject) {
  const auto cfg = load(c);
  verify::VerifyOptions opts;
  opts.seed = c.seed_set ? c.seed : cfg.scenario.seed + 1233;
  opts.inject_theta_sign_error = inject;
  const auto checks = verify::run_checks(cfg, opts);
  const std::string rep = verify::report(checks);
  fs::create_directories(cfg.output.dir);
  out::write_text(cfg.output.dir + "/verify_report.txt", rep);
  std::cout << rep;
  return verify::all_passed(checks) ? 0 : 1;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& tau_list,
              const std::string& tau_total_text) {
  auto cfg = load(c);
  if (tau_list.empty()) throw std::runtime_error("sweep: need at least one --tau value");
  const double tau_total = config::parse_value(tau_total_text);
  if (!(tau_total > 0.0)) throw std::runtime_error("sweep: total delay budget must be > 0");

  std::ostringstream summary;
  summary << "tau_max_s,m_rounds,scheme,final_loss,final_grad_sq,total_bits,total_delay_s\n";
  for (const auto& tau_text : tau_list) {
    const double tau = config::parse_value(tau_text);
    if (!(tau > 0.0)) throw std::runtime_error("sweep: tau_max must be > 0");
    config::ExperimentConfig point = cfg;
    point.allocator.tau_max = tau;
    point.sim.m_rounds = std::max(1, static_cast<int>(std::floor(tau_total / tau)));
    point.output.dir = cfg.output.dir + "/tau_" + out::g12(tau * 1e3) + "ms";
    const Built b = build(point);
    std::vector<std::pair<std::string, engine::RunResult>> runs;
    run_schemes(point, b, runs);
    write_run_artifacts(point, runs);
    for (const auto& [name, res] : runs)
      summary << out::g12(tau) << ',' << point.sim.m_rounds << ',' << name << ','
              << out::g12(res.rounds.back().loss) << ',' << out::g12(res.rounds.back().grad_sq)
              << ',' << out::g12(res.total_bits) << ',' << out::g12(res.total_delay) << '\n';
  }
  fs::create_directories(cfg.output.dir);
  out::write_text(cfg.output.dir + "/sweep_summary.csv", summary.str());
  std::cout << "sweep points: " << tau_list.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated averaging under uplink outage and quantization"};
  app.require_subcommand(1);

  Common c_alloc, c_sim, c_bound, c_verify, c_sweep;
  auto* alloc_cmd = app.add_subcommand("allocate", "solve the bandwidth/level allocation");
  add_common(alloc_cmd, c_alloc);

  auto* sim_cmd = app.add_subcommand("simulate", "run the configured schemes");
  add_common(sim_cmd, c_sim);

  std::string rounds_path;
  auto* bound_cmd = app.add_subcommand("bound", "evaluate the convergence bound terms");
  add_common(bound_cmd, c_bound);
  bound_cmd->add_option("--rounds", rounds_path, "rounds.jsonl to take per-round QE from");

  bool inject = false;
  auto* verify_cmd = app.add_subcommand("verify", "run the numerical self-checks");
  add_common(verify_cmd, c_verify);
  verify_cmd->add_flag("--inject-theta-sign-error", inject,
                       "flip the fade-margin sign to prove the consistency check can fail");

  std::vector<std::string> tau_list;
  std::string tau_total = "10";
  auto* sweep_cmd = app.add_subcommand("sweep", "sweep the per-round deadline under a fixed total");
  add_common(sweep_cmd, c_sweep);
  sweep_cmd->add_option("--tau", tau_list, "per-round deadlines (unit suffixes allowed)")
      ->delimiter(',');
  sweep_cmd->add_option("--tau-total", tau_total, "total delay budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (alloc_cmd->parsed()) return cmd_allocate(c_alloc);
    if (sim_cmd->parsed()) return cmd_simulate(c_sim);
    if (bound_cmd->parsed()) return cmd_bound(c_bound, rounds_path);
    if (verify_cmd->parsed()) return cmd_verify(c_verify, inject);
    if (sweep_cmd->parsed()) return cmd_sweep(c_sweep, tau_list, tau_total);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
