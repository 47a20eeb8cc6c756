#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "fedtoe/rng.hpp"
#include "fedtoe/types.hpp"

namespace fedtoe::scenario {

struct ClientProfile {
  int id = 0;
  double d = 0.0;     // distance to the server, m
  long long n = 0;    // local sample count
  double p = 0.0;     // data weight n / sum(n)
};

// Uniform placement over a disk of the given radius: d = radius * sqrt(u).
Vec place_clients(int n_clients, double radius, RandomStream& rng);

std::vector<ClientProfile> make_profiles(const Vec& d, const std::vector<long long>& n);

// Per-client objective F_i(w) = (1/2) ||A_i (w - c_i)||^2 with exact global
// optimum, smoothness constant and gradient-noise level, so convergence
// bounds can be evaluated without estimation. heterogeneity = 0 makes all
// clients identical (zero gradient divergence everywhere).
struct QuadraticTask {
  std::vector<Mat> a;       // A_i, symmetric PSD
  std::vector<Vec> center;  // c_i
  std::vector<Mat> hess;    // A_i^2
  Mat hess_mean;            // sum_i p_i A_i^2
  Vec p;
  Vec opt_w;
  double f_star = 0.0;
  double smooth_l = 0.0;    // max_i ||A_i^2||_2
  double sigma_sq = 0.0;    // per-sample gradient variance, noise_std^2 * dim
  double noise_std = 0.0;
  Index dim = 0;
};

QuadraticTask make_quadratic(Index dim, double heterogeneity, double noise_std, const Vec& p,
                             RandomStream& rng);

double loss(const QuadraticTask& t, const Vec& w);
double client_loss(const QuadraticTask& t, int i, const Vec& w);
Vec gradient(const QuadraticTask& t, const Vec& w);
Vec client_gradient(const QuadraticTask& t, int i, const Vec& w);

// Exact gradient plus the mean of `batch` i.i.d. N(0, noise_std^2 I) draws
// (sampling a fresh data point == drawing one noise vector).
Vec stochastic_gradient(const QuadraticTask& t, int i, const Vec& w, int batch,
                        RandomStream& rng);

struct HeteroReport {
  Vec pointwise;  // ||grad F_i(w) - grad F(w)||^2 at the given w
  Vec ball_max;   // upper bound of the same quantity over ||w' - w|| <= radius
};

HeteroReport heterogeneity_bounds(const QuadraticTask& t, const Vec& w, double ball_radius);

// Multinomial logistic regression on Gaussian class blobs with label-sorted
// shards: client label blocks slide with distance rank, at most
// classes_per_client labels each; classes_per_client == classes gives iid
// shards. Model is a flattened classes x (feat_dim + 1) matrix (bias last).
struct LogisticTask {
  Mat x;                    // samples x feat_dim
  std::vector<int> y;
  std::vector<std::pair<Index, Index>> shard;  // per-client [begin, end)
  int classes = 0;
  Index feat_dim = 0;
  Index dim = 0;            // classes * (feat_dim + 1)
  Vec p;
};

LogisticTask make_logistic_noniid(const Vec& d, int classes, int classes_per_client,
                                  int samples_per_client, Index feat_dim, double blob_spread,
                                  RandomStream& rng);

double loss(const LogisticTask& t, const Vec& w);
Vec gradient(const LogisticTask& t, const Vec& w);
Vec client_gradient(const LogisticTask& t, int i, const Vec& w);
Vec stochastic_gradient(const LogisticTask& t, int i, const Vec& w, int batch,
                        RandomStream& rng);

// Empirical per-client max of ||grad F_i - grad F||^2 over the given points.
Vec heterogeneity_empirical(const LogisticTask& t, const std::vector<Vec>& points);

// Type-erased task handle used by the training loop.
struct Task {
  Index dim = 0;
  int n_clients = 0;
  Vec p;
  std::vector<Index> groups;  // quantization range-block sizes, sum == dim
  std::function<Vec(int, const Vec&, int, RandomStream&)> stoch_grad;
  std::function<double(const Vec&)> loss_fn;
  std::function<Vec(const Vec&)> grad_fn;
  std::function<Vec(int, const Vec&)> client_grad_fn;
};

Task as_task(QuadraticTask t);
Task as_task(LogisticTask t);

}  // namespace fedtoe::scenario
