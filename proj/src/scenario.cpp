#include "fedtoe/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedtoe::scenario {

namespace {

void check_weights(const Vec& p) {
  if (p.size() == 0) throw std::invalid_argument("scenario: empty weight vector");
  double s = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::invalid_argument("scenario: weights must be positive");
    s += p[i];
  }
  if (std::abs(s - 1.0) > 1e-12)
    throw std::invalid_argument("scenario: weights must sum to 1");
}

Mat random_psd(Index dim, double scale, RandomStream& rng) {
  Mat g(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) g(r, c) = rng.gaussian();
  return scale / static_cast<double>(dim) * (g * g.transpose());
}

double spectral_norm_sym(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
}

}  // namespace

Vec place_clients(int n_clients, double radius, RandomStream& rng) {
  if (n_clients < 1 || !(radius > 0.0))
    throw std::invalid_argument("scenario: need n_clients >= 1 and radius > 0");
  Vec d(n_clients);
  for (int i = 0; i < n_clients; ++i) d[i] = radius * std::sqrt(rng.uniform01());
  return d;
}

std::vector<ClientProfile> make_profiles(const Vec& d, const std::vector<long long>& n) {
  if (static_cast<std::size_t>(d.size()) != n.size() || n.empty())
    throw std::invalid_argument("scenario: distances and sample counts must match");
  long long total = 0;
  for (long long v : n) {
    if (v < 1) throw std::invalid_argument("scenario: sample counts must be >= 1");
    total += v;
  }
  std::vector<ClientProfile> out(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    out[i].id = static_cast<int>(i);
    out[i].d = d[static_cast<Index>(i)];
    out[i].n = n[i];
    out[i].p = static_cast<double>(n[i]) / static_cast<double>(total);
  }
  return out;
}

QuadraticTask make_quadratic(Index dim, double heterogeneity, double noise_std, const Vec& p,
                             RandomStream& rng) {
  check_weights(p);
  if (dim < 1) throw std::invalid_argument("scenario: dimension must be >= 1");
  if (!(heterogeneity >= 0.0) || !(noise_std >= 0.0))
    throw std::invalid_argument("scenario: heterogeneity and noise_std must be >= 0");
  const int n = static_cast<int>(p.size());

  QuadraticTask t;
  t.dim = dim;
  t.p = p;
  t.noise_std = noise_std;
  t.sigma_sq = noise_std * noise_std * static_cast<double>(dim);

  const Mat shared = Mat::Identity(dim, dim) + random_psd(dim, 0.5, rng);
  t.a.reserve(static_cast<std::size_t>(n));
  t.center.reserve(static_cast<std::size_t>(n));
  t.hess.reserve(static_cast<std::size_t>(n));
  t.hess_mean = Mat::Zero(dim, dim);
  Vec rhs = Vec::Zero(dim);
  t.smooth_l = 0.0;
  for (int i = 0; i < n; ++i) {
    Mat ai = shared + heterogeneity * random_psd(dim, 1.0, rng);
    Vec ci(dim);
    for (Index j = 0; j < dim; ++j) ci[j] = heterogeneity * rng.gaussian();
    Mat hi = ai * ai;  // A_i symmetric
    t.hess_mean += p[i] * hi;
    rhs += p[i] * (hi * ci);
    t.smooth_l = std::max(t.smooth_l, spectral_norm_sym(hi));
    t.a.push_back(std::move(ai));
    t.center.push_back(std::move(ci));
    t.hess.push_back(std::move(hi));
  }
  t.opt_w = t.hess_mean.ldlt().solve(rhs);
  t.f_star = 0.0;
  for (int i = 0; i < n; ++i) t.f_star += p[i] * client_loss(t, i, t.opt_w);
  return t;
}

double client_loss(const QuadraticTask& t, int i, const Vec& w) {
  const Vec r = t.a[static_cast<std::size_t>(i)] * (w - t.center[static_cast<std::size_t>(i)]);
  return 0.5 * r.squaredNorm();
}

double loss(const QuadraticTask& t, const Vec& w) {
  double acc = 0.0;
  for (Index i = 0; i < t.p.size(); ++i) acc += t.p[i] * client_loss(t, static_cast<int>(i), w);
  return acc;
}

Vec client_gradient(const QuadraticTask& t, int i, const Vec& w) {
  return t.hess[static_cast<std::size_t>(i)] * (w - t.center[static_cast<std::size_t>(i)]);
}

Vec gradient(const QuadraticTask& t, const Vec& w) {
  Vec g = Vec::Zero(t.dim);
  for (Index i = 0; i < t.p.size(); ++i)
    g += t.p[i] * client_gradient(t, static_cast<int>(i), w);
  return g;
}

Vec stochastic_gradient(const QuadraticTask& t, int i, const Vec& w, int batch,
                        RandomStream& rng) {
  if (batch < 1) throw std::invalid_argument("scenario: batch size must be >= 1");
  Vec g = client_gradient(t, i, w);
  if (t.noise_std > 0.0) {
    Vec noise = Vec::Zero(t.dim);
    for (int s = 0; s < batch; ++s)
      for (Index j = 0; j < t.dim; ++j) noise[j] += rng.gaussian();
    g += (t.noise_std / batch) * noise;
  }
  return g;
}

HeteroReport heterogeneity_bounds(const QuadraticTask& t, const Vec& w, double ball_radius) {
  if (!(ball_radius >= 0.0)) throw std::invalid_argument("scenario: ball radius must be >= 0");
  const int n = static_cast<int>(t.p.size());
  HeteroReport rep;
  rep.pointwise = Vec(n);
  rep.ball_max = Vec(n);
  const Vec g = gradient(t, w);
  for (int i = 0; i < n; ++i) {
    const Vec v = client_gradient(t, i, w) - g;
    rep.pointwise[i] = v.squaredNorm();
    const double gap_norm = spectral_norm_sym(t.hess[static_cast<std::size_t>(i)] - t.hess_mean);
    const double reach = v.norm() + ball_radius * gap_norm;
    rep.ball_max[i] = reach * reach;
  }
  return rep;
}

LogisticTask make_logistic_noniid(const Vec& d, int classes, int classes_per_client,
                                  int samples_per_client, Index feat_dim, double blob_spread,
                                  RandomStream& rng) {
  const int n = static_cast<int>(d.size());
  if (n < 1) throw std::invalid_argument("scenario: need at least one client");
  if (classes < 2 || classes_per_client < 1 || classes_per_client > classes)
    throw std::invalid_argument("scenario: need 2 <= classes and 1 <= classes_per_client <= classes");
  if (samples_per_client < 1) throw std::invalid_argument("scenario: empty shards not allowed");
  if (feat_dim < 1) throw std::invalid_argument("scenario: feature dimension must be >= 1");

  LogisticTask t;
  t.classes = classes;
  t.feat_dim = feat_dim;
  t.dim = static_cast<Index>(classes) * (feat_dim + 1);
  t.p = Vec::Constant(n, 1.0 / n);

  Mat centers(classes, feat_dim);
  for (int c = 0; c < classes; ++c)
    for (Index j = 0; j < feat_dim; ++j) centers(c, j) = 3.0 * rng.gaussian();

  // distance rank decides each client's label window (farther => larger labels)
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (d[a] != d[b]) return d[a] < d[b];
    return a < b;
  });
  std::vector<int> rank(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;

  const Index total = static_cast<Index>(n) * samples_per_client;
  t.x = Mat(total, feat_dim);
  t.y.resize(static_cast<std::size_t>(total));
  t.shard.resize(static_cast<std::size_t>(n));
  Index row = 0;
  for (int i = 0; i < n; ++i) {
    const double frac = n > 1 ? static_cast<double>(rank[static_cast<std::size_t>(i)]) / (n - 1) : 0.0;
    const int base = static_cast<int>(std::lround(frac * (classes - classes_per_client)));
    t.shard[static_cast<std::size_t>(i)] = {row, row + samples_per_client};
    for (int s = 0; s < samples_per_client; ++s, ++row) {
      const int label = base + static_cast<int>(rng.uniform_int(0, classes_per_client - 1));
      t.y[static_cast<std::size_t>(row)] = label;
      for (Index j = 0; j < feat_dim; ++j)
        t.x(row, j) = centers(label, j) + blob_spread * rng.gaussian();
    }
  }
  return t;
}

namespace {

// per-sample cross-entropy gradient accumulated into g (layout: class-major
// rows of [weights, bias])
void accumulate_sample_grad(const LogisticTask& t, const Vec& w, Index row, double scale,
                            Vec& g, double* loss_acc) {
  const int cls = t.classes;
  const Index fd = t.feat_dim;
  Vec z(cls);
  for (int c = 0; c < cls; ++c) {
    const Index off = static_cast<Index>(c) * (fd + 1);
    double acc = w[off + fd];  // bias
    for (Index j = 0; j < fd; ++j) acc += w[off + j] * t.x(row, j);
    z[c] = acc;
  }
  const double zmax = z.maxCoeff();
  double norm = 0.0;
  for (int c = 0; c < cls; ++c) norm += std::exp(z[c] - zmax);
  const int label = t.y[static_cast<std::size_t>(row)];
  if (loss_acc) *loss_acc += scale * (std::log(norm) - (z[label] - zmax));
  for (int c = 0; c < cls; ++c) {
    const double soft = std::exp(z[c] - zmax) / norm;
    const double coef = scale * (soft - (c == label ? 1.0 : 0.0));
    const Index off = static_cast<Index>(c) * (fd + 1);
    for (Index j = 0; j < fd; ++j) g[off + j] += coef * t.x(row, j);
    g[off + fd] += coef;
  }
}

}  // namespace

double loss(const LogisticTask& t, const Vec& w) {
  if (w.size() != t.dim) throw std::invalid_argument("scenario: model size mismatch");
  Vec g = Vec::Zero(t.dim);
  double acc = 0.0;
  for (std::size_t i = 0; i < t.shard.size(); ++i) {
    const auto [b, e] = t.shard[i];
    const double scale = t.p[static_cast<Index>(i)] / static_cast<double>(e - b);
    for (Index row = b; row < e; ++row) accumulate_sample_grad(t, w, row, scale, g, &acc);
  }
  return acc;
}

Vec client_gradient(const LogisticTask& t, int i, const Vec& w) {
  if (w.size() != t.dim) throw std::invalid_argument("scenario: model size mismatch");
  const auto [b, e] = t.shard[static_cast<std::size_t>(i)];
  Vec g = Vec::Zero(t.dim);
  const double scale = 1.0 / static_cast<double>(e - b);
  for (Index row = b; row < e; ++row) accumulate_sample_grad(t, w, row, scale, g, nullptr);
  return g;
}

Vec gradient(const LogisticTask& t, const Vec& w) {
  Vec g = Vec::Zero(t.dim);
  for (std::size_t i = 0; i < t.shard.size(); ++i)
    g += t.p[static_cast<Index>(i)] * client_gradient(t, static_cast<int>(i), w);
  return g;
}

Vec stochastic_gradient(const LogisticTask& t, int i, const Vec& w, int batch,
                        RandomStream& rng) {
  if (batch < 1) throw std::invalid_argument("scenario: batch size must be >= 1");
  if (w.size() != t.dim) throw std::invalid_argument("scenario: model size mismatch");
  const auto [b, e] = t.shard[static_cast<std::size_t>(i)];
  if (e <= b) throw std::invalid_argument("scenario: empty shard");
  Vec g = Vec::Zero(t.dim);
  const double scale = 1.0 / batch;
  for (int s = 0; s < batch; ++s) {
    const Index row = b + rng.uniform_int(0, static_cast<std::int64_t>(e - b) - 1);
    accumulate_sample_grad(t, w, row, scale, g, nullptr);
  }
  return g;
}

Vec heterogeneity_empirical(const LogisticTask& t, const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("scenario: no evaluation points");
  const int n = static_cast<int>(t.shard.size());
  Vec out = Vec::Zero(n);
  for (const Vec& w : points) {
    const Vec g = gradient(t, w);
    for (int i = 0; i < n; ++i)
      out[i] = std::max(out[i], (client_gradient(t, i, w) - g).squaredNorm());
  }
  return out;
}

Task as_task(QuadraticTask t) {
  auto shared = std::make_shared<QuadraticTask>(std::move(t));
  Task h;
  h.dim = shared->dim;
  h.n_clients = static_cast<int>(shared->p.size());
  h.p = shared->p;
  h.groups = {shared->dim};
  h.stoch_grad = [shared](int i, const Vec& w, int batch, RandomStream& rng) {
    return stochastic_gradient(*shared, i, w, batch, rng);
  };
  h.loss_fn = [shared](const Vec& w) { return loss(*shared, w); };
  h.grad_fn = [shared](const Vec& w) { return gradient(*shared, w); };
  h.client_grad_fn = [shared](int i, const Vec& w) { return client_gradient(*shared, i, w); };
  return h;
}

Task as_task(LogisticTask t) {
  auto shared = std::make_shared<LogisticTask>(std::move(t));
  Task h;
  h.dim = shared->dim;
  h.n_clients = static_cast<int>(shared->shard.size());
  h.p = shared->p;
  h.groups.assign(static_cast<std::size_t>(shared->classes), shared->feat_dim + 1);
  h.stoch_grad = [shared](int i, const Vec& w, int batch, RandomStream& rng) {
    return stochastic_gradient(*shared, i, w, batch, rng);
  };
  h.loss_fn = [shared](const Vec& w) { return loss(*shared, w); };
  h.grad_fn = [shared](const Vec& w) { return gradient(*shared, w); };
  h.client_grad_fn = [shared](int i, const Vec& w) { return client_gradient(*shared, i, w); };
  return h;
}

}  // namespace fedtoe::scenario
