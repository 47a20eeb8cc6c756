#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "fedtoe/analysis.hpp"
#include "fedtoe/rng.hpp"

using namespace fedtoe;
using namespace fedtoe::stats;

namespace {

BoundInputs base_inputs(int n) {
  BoundInputs in;
  in.smooth_l = 2.0;
  in.sigma_sq = 4.0;
  in.batch = 16;
  in.f0_minus_fstar = 10.0;
  in.p = Vec::Constant(n, 1.0 / n);
  in.q = Vec::Constant(n, 0.1);
  in.d_sq = Vec::Zero(n);
  in.k = 4;
  in.m_rounds = 4000;
  in.e_local = 2;
  in.j_sq = Mat::Zero(in.m_rounds, n);
  return in;
}

}  // namespace

TEST_CASE("two-client enumeration matches hand-computed fractions") {
  // N=2, K=2, p=(1/2,1/2), q=(1/10,2/5); enumerating the 4 ordered
  // selections and 3 surviving indicator patterns each gives
  // beta=(37/64, 27/64), alpha=(571/1408, 267/896).
  Vec p(2), q(2);
  p << 0.5, 0.5;
  q << 0.1, 0.4;
  auto st = participation_stats_exact(p, q, 2);
  CHECK(st.beta[0] == doctest::Approx(37.0 / 64.0).epsilon(1e-13));
  CHECK(st.beta[1] == doctest::Approx(27.0 / 64.0).epsilon(1e-13));
  CHECK(st.alpha[0] == doctest::Approx(571.0 / 1408.0).epsilon(1e-13));
  CHECK(st.alpha[1] == doctest::Approx(267.0 / 896.0).epsilon(1e-13));
  CHECK(st.k_bar == doctest::Approx(4928.0 / 3467.0).epsilon(1e-13));
  // the less reliable client is under-represented relative to its weight
  CHECK(st.beta[1] < p[1]);
}

TEST_CASE("conditional participation weights sum to one") {
  RandomStream rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 2 + trial % 3;
    Vec p(n), q(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      p[i] = 0.2 + rng.uniform01();
      s += p[i];
    }
    p /= s;
    for (int i = 0; i < n; ++i) q[i] = 0.6 * rng.uniform01();
    auto st = participation_stats_exact(p, q, 3);
    CHECK(st.beta.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < n; ++i) {
      CHECK(st.beta[i] > 0.0);
      CHECK(st.alpha[i] > 0.0);
      CHECK(st.alpha[i] <= st.beta[i] + 1e-15);  // 1/v^2 <= 1/v
    }
    CHECK(st.k_bar >= 1.0);
    CHECK(st.k_bar <= 3.0 + 1e-12);
  }
}

TEST_CASE("identical outage makes participation proportional to the weights") {
  Vec p(4), q(4);
  p << 0.4, 0.3, 0.2, 0.1;
  q.setConstant(0.35);
  auto st = participation_stats_exact(p, q, 3);
  for (int i = 0; i < 4; ++i) {
    CHECK(st.beta[i] == doctest::Approx(p[i]).epsilon(1e-12));
    CHECK(st.alpha[i] == doctest::Approx(p[i] / st.k_bar).epsilon(1e-12));
  }
  CHECK(st.k_bar == doctest::Approx(effective_clients_uniform(0.35, 3)).epsilon(1e-12));
}

TEST_CASE("effective client count closed form") {
  // K=2, q=1/2: (1-1/4) / (2*(1/2)(1/2)/1 + (1/4)/2) = 0.75/0.625
  CHECK(effective_clients_uniform(0.5, 2) == doctest::Approx(1.2).epsilon(1e-14));
  for (int k : {1, 2, 5, 10}) {
    CHECK(effective_clients_uniform(0.0, k) == doctest::Approx(double(k)).epsilon(1e-14));
    double prev = double(k);
    for (double q : {0.1, 0.3, 0.6, 0.9, 0.99}) {
      double cur = effective_clients_uniform(q, k);
      CHECK(cur < prev + 1e-14);
      CHECK(cur >= 1.0 - 1e-12);
      prev = cur;
    }
  }
  CHECK_THROWS_AS(effective_clients_uniform(1.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(effective_clients_uniform(0.5, 0), std::invalid_argument);
}

TEST_CASE("Monte Carlo participation agrees with enumeration") {
  Vec p(4), q(4);
  p << 0.35, 0.3, 0.2, 0.15;
  q << 0.05, 0.3, 0.5, 0.15;
  auto ex = participation_stats_exact(p, q, 3);
  RandomStream rng(808);
  auto mc = participation_stats_mc(p, q, 3, 200000, rng);
  CHECK(mc.kept == mc.trials);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(mc.beta[i] - ex.beta[i]) < 4.0 * mc.beta_se[i]);
    CHECK(std::abs(mc.alpha[i] - ex.alpha[i]) < 4.0 * mc.alpha_se[i]);
  }
  CHECK(mc.k_bar == doctest::Approx(ex.k_bar).epsilon(0.01));
}

TEST_CASE("chi-square divergence") {
  Vec p(2), b(2);
  p << 0.5, 0.5;
  b << 0.6, 0.4;
  CHECK(chi_square_divergence(b, p) == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(chi_square_divergence(p, p) == 0.0);
  Vec mism(3);
  CHECK_THROWS_AS(chi_square_divergence(mism, p), std::invalid_argument);
}

TEST_CASE("uniform-outage form equals the general bound") {
  RandomStream rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 3 + trial;
    BoundInputs in = base_inputs(n);
    in.q.setConstant(0.05 + 0.1 * trial);
    for (int i = 0; i < n; ++i) in.d_sq[i] = rng.uniform01() * 3.0;
    for (int r = 0; r < in.m_rounds; ++r)
      for (int i = 0; i < n; ++i) in.j_sq(r, i) = rng.uniform01() * 0.5;
    auto gen = convergence_bound_general(in);
    auto uni = convergence_bound_uniform(in);
    CHECK(uni.total == doctest::Approx(gen.total).epsilon(1e-12));
    CHECK(uni.qe == doctest::Approx(gen.qe).epsilon(1e-12));
    CHECK(uni.hetero_alpha == doctest::Approx(gen.hetero_alpha).epsilon(1e-12));
    CHECK(uni.hetero_beta == doctest::Approx(gen.hetero_beta).epsilon(1e-12));
    CHECK(gen.skew == 0.0);
    CHECK(gen.outage_spread == 0.0);
  }
  BoundInputs in = base_inputs(3);
  in.q << 0.1, 0.2, 0.1;
  CHECK_THROWS_AS(convergence_bound_uniform(in), std::invalid_argument);
}

TEST_CASE("spread terms appear exactly when outage is heterogeneous") {
  BoundInputs in = base_inputs(3);
  in.d_sq << 1.0, 2.0, 3.0;
  in.q << 0.05, 0.25, 0.4;
  auto b = convergence_bound_general(in);
  CHECK(b.skew > 0.0);
  CHECK(b.outage_spread > 0.0);
  in.q.setConstant(0.25);
  auto u = convergence_bound_general(in);
  CHECK(u.skew == 0.0);
  CHECK(u.outage_spread == 0.0);
}

TEST_CASE("homogeneous noiseless-quantizer bound scales as 1/sqrt(T)") {
  BoundInputs in = base_inputs(4);
  in.q.setZero();
  auto b1 = convergence_bound_general(in);
  BoundInputs in4 = in;
  in4.m_rounds *= 4;
  in4.j_sq = Mat::Zero(in4.m_rounds, 4);
  auto b4 = convergence_bound_general(in4);
  CHECK(b1.opt_gap / b4.opt_gap == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(b1.total / b4.total == doctest::Approx(2.0).epsilon(0.05));
  CHECK(b4.gamma == doctest::Approx(b1.gamma / 2.0).epsilon(1e-12));
  CHECK(b1.k_bar == doctest::Approx(4.0).epsilon(1e-12));
  // with no heterogeneity, noise, or quantization those are the only terms
  CHECK(b1.qe == 0.0);
  CHECK(b1.hetero_alpha == 0.0);
  CHECK(b1.hetero_beta == 0.0);
  CHECK(b1.total == doctest::Approx(b1.opt_gap + b1.sgd_noise).epsilon(1e-14));
}

TEST_CASE("per-round realized quantization errors slot into the bound") {
  RandomStream rng(321);
  BoundInputs in = base_inputs(3);
  for (int r = 0; r < in.m_rounds; ++r)
    for (int i = 0; i < 3; ++i) in.j_sq(r, i) = rng.uniform01();
  Vec round_qe(in.m_rounds);
  for (int r = 0; r < in.m_rounds; ++r) round_qe[r] = in.j_sq.row(r).dot(in.p);
  auto direct = convergence_bound_uniform(in);
  auto sampled = convergence_bound_uniform_sampled(in, round_qe);
  CHECK(sampled.qe == doctest::Approx(direct.qe).epsilon(1e-12));
  CHECK(sampled.total == doctest::Approx(direct.total).epsilon(1e-12));
  Vec wrong(in.m_rounds - 1);
  CHECK_THROWS_AS(convergence_bound_uniform_sampled(in, wrong), std::invalid_argument);
}

TEST_CASE("step-size schedule") {
  auto s = schedule_hyperparams(64, 1.0, 1.0);
  CHECK(s.gamma == doctest::Approx(1.0 / 64.0).epsilon(1e-14));
  CHECK(s.e_max == 2);  // floor(64^(1/4))
  auto s2 = schedule_hyperparams(10000, 4.0, 2.0);
  CHECK(s2.gamma == doctest::Approx(2.0 / (8.0 * 2.0 * 100.0)).epsilon(1e-14));
  CHECK(s2.e_max == static_cast<long long>(std::floor(std::pow(1e4, 0.25) / std::pow(4.0, 0.75))));
  CHECK_THROWS_AS(schedule_hyperparams(0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(schedule_hyperparams(10, 4.0, 1.0), std::invalid_argument);  // T < k_bar^3
}

TEST_CASE("bound preconditions are enforced") {
  BoundInputs in = base_inputs(3);
  in.m_rounds = 2;  // T = 4 < k_bar^3
  in.j_sq = Mat::Zero(2, 3);
  CHECK_THROWS_AS(convergence_bound_general(in), std::invalid_argument);

  in = base_inputs(3);
  in.e_local = 50;  // exceeds T^(1/4)/k_bar^(3/4)
  CHECK_THROWS_AS(convergence_bound_general(in), std::invalid_argument);

  in = base_inputs(3);
  in.j_sq = Mat::Zero(5, 3);  // wrong row count
  CHECK_THROWS_AS(convergence_bound_general(in), std::invalid_argument);

  in = base_inputs(3);
  in.p[0] += 0.5;  // weights no longer sum to 1
  CHECK_THROWS_AS(convergence_bound_general(in), std::invalid_argument);

  in = base_inputs(3);
  in.q[1] = 1.0;
  CHECK_THROWS_AS(convergence_bound_general(in), std::invalid_argument);
}

TEST_CASE("input guards on the enumeration") {
  Vec p(2), q(2);
  p << 0.5, 0.5;
  q << 0.1, 0.2;
  CHECK_THROWS_AS(participation_stats_exact(p, q, 0), std::invalid_argument);
  // N^K 2^K guard
  Vec pl = Vec::Constant(50, 1.0 / 50.0), ql = Vec::Constant(50, 0.1);
  CHECK_THROWS_AS(participation_stats_exact(pl, ql, 10), std::invalid_argument);
  RandomStream rng(1);
  CHECK_THROWS_AS(participation_stats_mc(p, q, 2, 0, rng), std::invalid_argument);
}
