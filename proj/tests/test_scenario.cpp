#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "fedtoe/scenario.hpp"

using namespace fedtoe;
using namespace fedtoe::scenario;

namespace {

Vec uniform_weights(int n) { return Vec::Constant(n, 1.0 / n); }

Vec random_point(Index dim, RandomStream& rng, double scale = 1.0) {
  Vec w(dim);
  for (Index i = 0; i < dim; ++i) w[i] = scale * rng.gaussian();
  return w;
}

// independent spectral-norm oracle: power iteration on a symmetric matrix
double power_norm(const Mat& m) {
  Vec v = Vec::Ones(m.rows()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vec next = m * v;
    lam = next.norm();
    if (lam == 0.0) return 0.0;
    v = next / lam;
  }
  return lam;
}

}  // namespace

TEST_CASE("disk placement has the sqrt-density moments") {
  RandomStream rng(61);
  const int n = 1000000;
  const double radius = 600.0;
  Vec d = place_clients(n, radius, rng);
  double mean = d.mean();
  double var = (d.array() - mean).square().mean();
  int inner = 0, outside = 0;
  for (int i = 0; i < n; ++i) {
    if (d[i] < 0.0 || d[i] > radius) ++outside;
    if (d[i] <= radius / 2.0) ++inner;
  }
  CHECK(outside == 0);
  // E[d] = 2R/3, Var[d] = R^2/18, P[d <= R/2] = 1/4
  double se_mean = std::sqrt(radius * radius / 18.0 / n);
  CHECK(std::abs(mean - 2.0 * radius / 3.0) < 4.0 * se_mean);
  CHECK(var == doctest::Approx(radius * radius / 18.0).epsilon(0.01));
  double se_frac = std::sqrt(0.25 * 0.75 / n);
  CHECK(std::abs(inner / double(n) - 0.25) < 4.0 * se_frac);
  CHECK_THROWS_AS(place_clients(0, radius, rng), std::invalid_argument);
  CHECK_THROWS_AS(place_clients(5, 0.0, rng), std::invalid_argument);
}

TEST_CASE("profiles carry data-proportional weights") {
  Vec d(3);
  d << 100.0, 200.0, 300.0;
  auto prof = make_profiles(d, {600, 300, 100});
  CHECK(prof[0].p == doctest::Approx(0.6));
  CHECK(prof[1].p == doctest::Approx(0.3));
  CHECK(prof[2].p == doctest::Approx(0.1));
  CHECK_THROWS_AS(make_profiles(d, {600, 300}), std::invalid_argument);
  CHECK_THROWS_AS(make_profiles(d, {600, 300, 0}), std::invalid_argument);
}

TEST_CASE("quadratic gradient matches finite differences") {
  RandomStream rng(62);
  auto t = make_quadratic(6, 1.0, 0.5, uniform_weights(3), rng);
  Vec w = random_point(6, rng, 2.0);
  Vec g = gradient(t, w);
  for (Index j = 0; j < 6; ++j) {
    double h = 1e-6 * (1.0 + std::abs(w[j]));
    Vec wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    double fd = (loss(t, wp) - loss(t, wm)) / (2.0 * h);
    CHECK(g[j] == doctest::Approx(fd).epsilon(1e-6));
  }
  // client gradients average to the global one
  Vec avg = Vec::Zero(6);
  for (int i = 0; i < 3; ++i) avg += t.p[i] * client_gradient(t, i, w);
  CHECK((avg - g).norm() < 1e-12 * std::max(1.0, g.norm()));
}

TEST_CASE("quadratic optimum is exact") {
  RandomStream rng(63);
  auto t = make_quadratic(5, 1.5, 0.0, uniform_weights(4), rng);
  CHECK(gradient(t, t.opt_w).norm() < 1e-9);
  CHECK(loss(t, t.opt_w) == doctest::Approx(t.f_star).epsilon(1e-12));
  CHECK(t.f_star >= 0.0);
  for (int s = 0; s < 20; ++s) {
    Vec w = t.opt_w + random_point(5, rng, 0.5);
    CHECK(loss(t, w) >= t.f_star - 1e-12);
  }
}

TEST_CASE("smoothness constant bounds every Hessian") {
  RandomStream rng(64);
  auto t = make_quadratic(7, 2.0, 0.0, uniform_weights(5), rng);
  double max_norm = 0.0;
  for (const auto& h : t.hess) max_norm = std::max(max_norm, power_norm(h));
  CHECK(t.smooth_l == doctest::Approx(max_norm).epsilon(1e-8));
  // gradient Lipschitz property on random pairs, per client and globally
  for (int s = 0; s < 30; ++s) {
    Vec w1 = random_point(7, rng, 3.0), w2 = random_point(7, rng, 3.0);
    double dist = (w1 - w2).norm();
    CHECK((gradient(t, w1) - gradient(t, w2)).norm() <= t.smooth_l * dist * (1 + 1e-10));
    for (int i = 0; i < 5; ++i) {
      CHECK((client_gradient(t, i, w1) - client_gradient(t, i, w2)).norm() <=
            t.smooth_l * dist * (1 + 1e-10));
    }
  }
}

TEST_CASE("stochastic gradients are unbiased with variance sigma^2/batch") {
  RandomStream rng(65);
  auto t = make_quadratic(8, 1.0, 0.7, uniform_weights(3), rng);
  CHECK(t.sigma_sq == doctest::Approx(0.7 * 0.7 * 8.0).epsilon(1e-14));
  Vec w = random_point(8, rng);
  Vec g = client_gradient(t, 1, w);

  const int batch = 4;
  const int n = 40000;
  Vec sum = Vec::Zero(8);
  double sq_dev = 0.0;
  for (int s = 0; s < n; ++s) {
    Vec gs = stochastic_gradient(t, 1, w, batch, rng);
    sum += gs;
    sq_dev += (gs - g).squaredNorm();
  }
  double coord_se = t.noise_std / std::sqrt(double(batch) * n);
  for (Index j = 0; j < 8; ++j) CHECK(std::abs(sum[j] / n - g[j]) < 4.0 * coord_se);
  // E||g_hat - g||^2 = dim * noise^2 / batch
  CHECK(sq_dev / n == doctest::Approx(t.sigma_sq / batch).epsilon(0.03));

  // zero noise degenerates to the exact client gradient
  auto t0 = make_quadratic(4, 1.0, 0.0, uniform_weights(2), rng);
  Vec w0 = random_point(4, rng);
  CHECK((stochastic_gradient(t0, 0, w0, 3, rng) - client_gradient(t0, 0, w0)).norm() == 0.0);
  CHECK_THROWS_AS(stochastic_gradient(t, 0, w, 0, rng), std::invalid_argument);
}

TEST_CASE("zero heterogeneity collapses the clients") {
  RandomStream rng(66);
  auto t = make_quadratic(6, 0.0, 0.3, uniform_weights(4), rng);
  Vec w = random_point(6, rng, 2.0);
  Vec g0 = client_gradient(t, 0, w);
  for (int i = 1; i < 4; ++i) {
    CHECK((client_gradient(t, i, w) - g0).norm() == 0.0);
    CHECK(client_loss(t, i, w) == doctest::Approx(client_loss(t, 0, w)).epsilon(1e-14));
  }
  auto rep = heterogeneity_bounds(t, w, 10.0);
  CHECK(rep.pointwise.maxCoeff() == 0.0);
  CHECK(rep.ball_max.maxCoeff() == 0.0);
  CHECK((t.opt_w - t.center[0]).norm() < 1e-9);
}

TEST_CASE("heterogeneity bounds grow with the ball radius") {
  RandomStream rng(67);
  auto t = make_quadratic(5, 1.2, 0.0, uniform_weights(3), rng);
  Vec w = random_point(5, rng);
  Vec g = gradient(t, w);
  auto r0 = heterogeneity_bounds(t, w, 0.0);
  auto r1 = heterogeneity_bounds(t, w, 1.0);
  auto r2 = heterogeneity_bounds(t, w, 2.5);
  for (int i = 0; i < 3; ++i) {
    double direct = (client_gradient(t, i, w) - g).squaredNorm();
    CHECK(r0.pointwise[i] == doctest::Approx(direct).epsilon(1e-12));
    CHECK(r0.ball_max[i] == doctest::Approx(direct).epsilon(1e-12));
    CHECK(r1.ball_max[i] >= r0.ball_max[i]);
    CHECK(r2.ball_max[i] >= r1.ball_max[i]);
    // bound actually dominates sampled points in the ball
    for (int s = 0; s < 40; ++s) {
      Vec u = random_point(5, rng);
      Vec wp = w + u / u.norm() * rng.uniform01() * 2.5;
      double val = (client_gradient(t, i, wp) - gradient(t, wp)).squaredNorm();
      CHECK(val <= r2.ball_max[i] * (1 + 1e-9));
    }
  }
  CHECK_THROWS_AS(heterogeneity_bounds(t, w, -1.0), std::invalid_argument);
}

TEST_CASE("label shards slide with distance rank") {
  RandomStream rng(68);
  const int n = 12, classes = 10, cpc = 2, spc = 40;
  Vec d = place_clients(n, 600.0, rng);
  auto t = make_logistic_noniid(d, classes, cpc, spc, 6, 0.8, rng);
  REQUIRE(static_cast<int>(t.shard.size()) == n);
  CHECK(t.p.sum() == doctest::Approx(1.0));
  CHECK(t.dim == classes * 7);

  // recompute each client's distance rank with the same tie rule
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (d[a] != d[b]) return d[a] < d[b];
    return a < b;
  });

  Index covered = 0;
  for (int r = 0; r < n; ++r) {
    int i = order[static_cast<std::size_t>(r)];
    auto [b, e] = t.shard[static_cast<std::size_t>(i)];
    CHECK(e - b == spc);
    covered += e - b;
    int base = static_cast<int>(std::lround(double(r) / (n - 1) * (classes - cpc)));
    std::set<int> labels;
    for (Index row = b; row < e; ++row) {
      labels.insert(t.y[static_cast<std::size_t>(row)]);
      CHECK(t.y[static_cast<std::size_t>(row)] >= base);
      CHECK(t.y[static_cast<std::size_t>(row)] <= base + cpc - 1);
    }
    CHECK(static_cast<int>(labels.size()) <= cpc);
  }
  CHECK(covered == t.x.rows());

  // nearest client sees the smallest labels, farthest the largest
  auto [b0, e0] = t.shard[static_cast<std::size_t>(order.front())];
  auto [bn, en] = t.shard[static_cast<std::size_t>(order.back())];
  CHECK(*std::max_element(t.y.begin() + b0, t.y.begin() + e0) <= cpc - 1);
  CHECK(*std::min_element(t.y.begin() + bn, t.y.begin() + en) >= classes - cpc);
}

TEST_CASE("matching classes-per-client to the class count removes the windows") {
  RandomStream rng(69);
  Vec d = place_clients(8, 600.0, rng);
  auto t = make_logistic_noniid(d, 4, 4, 120, 5, 1.0, rng);
  // every shard can draw every label; at 120 samples a missing label has
  // probability (3/4)^120 < 1e-15 per shard
  for (const auto& [b, e] : t.shard) {
    std::set<int> labels(t.y.begin() + b, t.y.begin() + e);
    CHECK(static_cast<int>(labels.size()) == 4);
  }
  CHECK_THROWS_AS(make_logistic_noniid(d, 1, 1, 10, 5, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_logistic_noniid(d, 4, 5, 10, 5, 1.0, rng), std::invalid_argument);
}

TEST_CASE("logistic gradient matches finite differences") {
  RandomStream rng(70);
  Vec d = place_clients(4, 500.0, rng);
  auto t = make_logistic_noniid(d, 3, 2, 15, 4, 1.0, rng);
  Vec w = random_point(t.dim, rng, 0.4);
  Vec g = gradient(t, w);
  for (Index j = 0; j < t.dim; ++j) {
    double h = 1e-6 * (1.0 + std::abs(w[j]));
    Vec wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    double fd = (loss(t, wp) - loss(t, wm)) / (2.0 * h);
    CHECK(g[j] == doctest::Approx(fd).epsilon(5e-6).scale(1.0));
  }
  Vec avg = Vec::Zero(t.dim);
  for (int i = 0; i < 4; ++i) avg += t.p[i] * client_gradient(t, i, w);
  CHECK((avg - g).norm() < 1e-12);
}

TEST_CASE("logistic stochastic gradient is unbiased over shard draws") {
  RandomStream rng(71);
  Vec d = place_clients(3, 500.0, rng);
  auto t = make_logistic_noniid(d, 3, 2, 10, 4, 1.0, rng);
  Vec w = random_point(t.dim, rng, 0.3);
  Vec g = client_gradient(t, 2, w);
  const int n = 30000;
  Vec sum = Vec::Zero(t.dim);
  double worst = 0.0;
  for (int s = 0; s < n; ++s) sum += stochastic_gradient(t, 2, w, 2, rng);
  for (Index j = 0; j < t.dim; ++j) worst = std::max(worst, std::abs(sum[j] / n - g[j]));
  CHECK(worst < 0.02);  // per-sample gradients are O(1) here
}

TEST_CASE("empirical heterogeneity maxes over the probe points") {
  RandomStream rng(72);
  Vec d = place_clients(5, 400.0, rng);
  auto t = make_logistic_noniid(d, 4, 2, 20, 3, 1.0, rng);
  std::vector<Vec> pts1{random_point(t.dim, rng, 0.3)};
  std::vector<Vec> pts2 = pts1;
  pts2.push_back(random_point(t.dim, rng, 0.3));
  Vec h1 = heterogeneity_empirical(t, pts1);
  Vec h2 = heterogeneity_empirical(t, pts2);
  for (int i = 0; i < 5; ++i) {
    CHECK(h1[i] >= 0.0);
    CHECK(h2[i] >= h1[i] - 1e-15);
  }
  Vec g = gradient(t, pts1[0]);
  for (int i = 0; i < 5; ++i) {
    CHECK(h1[i] == doctest::Approx((client_gradient(t, i, pts1[0]) - g).squaredNorm())
                       .epsilon(1e-12));
  }
  CHECK_THROWS_AS(heterogeneity_empirical(t, {}), std::invalid_argument);
}

TEST_CASE("task handles forward to the underlying objects") {
  RandomStream rng(73);
  auto quad = make_quadratic(5, 1.0, 0.4, uniform_weights(3), rng);
  QuadraticTask copy = quad;
  Task h = as_task(std::move(copy));
  CHECK(h.dim == 5);
  CHECK(h.n_clients == 3);
  REQUIRE(h.groups.size() == 1);
  CHECK(h.groups[0] == 5);
  Vec w = random_point(5, rng);
  CHECK(h.loss_fn(w) == doctest::Approx(loss(quad, w)).epsilon(1e-15));
  CHECK((h.grad_fn(w) - gradient(quad, w)).norm() == 0.0);
  CHECK((h.client_grad_fn(2, w) - client_gradient(quad, 2, w)).norm() == 0.0);
  RandomStream r1(5), r2(5);
  CHECK((h.stoch_grad(1, w, 4, r1) - stochastic_gradient(quad, 1, w, 4, r2)).norm() == 0.0);

  Vec d = place_clients(3, 500.0, rng);
  auto logi = make_logistic_noniid(d, 3, 2, 10, 4, 1.0, rng);
  LogisticTask lcopy = logi;
  Task hl = as_task(std::move(lcopy));
  CHECK(hl.dim == logi.dim);
  REQUIRE(hl.groups.size() == 3);
  Index total = 0;
  for (Index s : hl.groups) {
    CHECK(s == logi.feat_dim + 1);
    total += s;
  }
  CHECK(total == hl.dim);
}

TEST_CASE("weight vector validation") {
  RandomStream rng(74);
  Vec bad = Vec::Constant(3, 0.5);  // sums to 1.5
  CHECK_THROWS_AS(make_quadratic(4, 1.0, 0.1, bad, rng), std::invalid_argument);
  Vec neg(2);
  neg << 1.5, -0.5;
  CHECK_THROWS_AS(make_quadratic(4, 1.0, 0.1, neg, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_quadratic(0, 1.0, 0.1, uniform_weights(2), rng), std::invalid_argument);
  CHECK_THROWS_AS(make_quadratic(4, -1.0, 0.1, uniform_weights(2), rng), std::invalid_argument);
}
