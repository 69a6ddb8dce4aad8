#pragma once

// Randomized property sweeps shared by the unit tests and the acceptance
// suite. Each returns the number of violated instances.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cmsent/attention_classifier.hpp"
#include "cmsent/ensemble.hpp"
#include "cmsent/evaluation.hpp"
#include "oracles.hpp"

namespace invariants {

using cmsent::Tensor;

/// Sum of attention weights, convex hull of h, and padding insensitivity.
inline std::size_t attention(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t failures = 0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t D = 1 + rng() % 4, H = 1 + rng() % 4, n = 1 + rng() % 6, pad = 1 + rng() % 4;
    const auto params = oracle::random_bilstm(D, H, rng);
    const Tensor x = oracle::random_tensor({n, D}, rng, -2.0, 2.0);
    const auto out = cmsent::attn_forward(x, std::vector<bool>(n, true), params);

    bool ok = true;
    double sum = 0.0;
    for (double v : out.a.data()) {
      ok = ok && v >= 0.0;
      sum += v;
    }
    ok = ok && std::abs(sum - 1.0) <= 1e-12;
    for (std::size_t j = 0; j < 2 * H; ++j) {
      double lo = out.K.at(0, j), hi = lo;
      for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, out.K.at(i, j));
        hi = std::max(hi, out.K.at(i, j));
      }
      ok = ok && out.h[j] >= lo && out.h[j] <= hi;
    }

    // Pad rows hold arbitrary values; the mask alone must exclude them.
    Tensor padded = oracle::random_tensor({n + pad, D}, rng, -5.0, 5.0);
    std::copy(x.data().begin(), x.data().end(), padded.data().begin());
    std::vector<bool> mask(n + pad, false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n), true);
    const auto out_pad = cmsent::attn_forward(padded, mask, params);
    ok = ok && out_pad.e == out.e && out_pad.a == out.a && out_pad.h == out.h;

    failures += !ok;
  }
  return failures;
}

/// Every probability vector on the simplex grid with the given step.
inline std::vector<Tensor> simplex_grid(double step) {
  const int m = static_cast<int>(std::lround(1.0 / step));
  std::vector<Tensor> grid;
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; i + j <= m; ++j) {
      const double a = i / static_cast<double>(m), b = j / static_cast<double>(m);
      grid.push_back(Tensor::vector({a, b, (m - i - j) / static_cast<double>(m)}));
    }
  }
  return grid;
}

/// Class and tie flag by the ensemble's rule: first maximal index wins.
inline std::pair<std::size_t, bool> argmax(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < 3; ++c) {
    if (v[c] > v[best]) best = c;
  }
  std::size_t count = 0;
  for (std::size_t c = 0; c < 3; ++c) count += v[c] == v[best];
  return {best, count > 1};
}

/// Checks argmax invariance under a uniform co-factor, symmetry and veto for one pair.
inline bool ensemble_pair(const Tensor& p, const Tensor& q) {
  static const Tensor uniform = Tensor::vector({1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto pq = cmsent::combine(p, q);
  const auto qp = cmsent::combine(q, p);
  bool ok = pq.label == qp.label && pq.tie == qp.tie;
  for (const Tensor* v : {&p, &q}) {
    const auto [cls, tie] = argmax(*v);
    const auto with_uniform = cmsent::combine(*v, uniform);
    const auto flipped = cmsent::combine(uniform, *v);
    ok = ok && cmsent::index_of(with_uniform.label) == cls && with_uniform.tie == tie;
    ok = ok && cmsent::index_of(flipped.label) == cls && flipped.tie == tie;
  }
  const bool all_vetoed = pq.raw[0] == 0.0 && pq.raw[1] == 0.0 && pq.raw[2] == 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    if (p[c] == 0.0 || q[c] == 0.0) ok = ok && pq.raw[c] == 0.0 && (all_vetoed || pq.p_final[c] == 0.0);
  }
  return ok;
}

inline Tensor random_probability(std::mt19937_64& rng) {
  std::exponential_distribution<double> dist(1.0);
  Tensor p({3});
  double s = 0.0;
  for (double& v : p.data()) s += v = dist(rng);
  for (double& v : p.data()) v /= s;
  return p;
}

inline std::size_t ensemble(double step, std::size_t random_pairs, std::uint64_t seed) {
  std::size_t failures = 0;
  const auto grid = simplex_grid(step);
  for (const auto& p : grid) {
    for (const auto& q : grid) failures += !ensemble_pair(p, q);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < random_pairs; ++k) {
    const Tensor p = random_probability(rng);
    failures += !ensemble_pair(p, random_probability(rng));
  }
  return failures;
}

/// |mean squared residual of the 2-component reconstruction - sum of the
/// discarded eigenvalues|, both sides computed independently of pca_2d's solver.
inline double pca_reconstruction_gap(const Tensor& data) {
  const auto p = cmsent::pca_2d(data);
  const std::size_t N = data.dim(0), d = data.dim(1);
  double residual = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double approx = p.mean[j] + p.coords.at(i, 0) * p.axes.at(0, j) + p.coords.at(i, 1) * p.axes.at(1, j);
      const double r = data.at(i, j) - approx;
      residual += r * r / static_cast<double>(N);
    }
  }
  const auto ev = oracle::jacobi_eigenvalues(oracle::covariance(data));
  double discarded = 0.0;
  for (std::size_t k = 2; k < ev.size(); ++k) discarded += ev[k];
  return std::abs(residual - discarded);
}

/// Worst reconstruction gap over random datasets with N <= 200 rows.
inline double pca(std::size_t datasets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < datasets; ++k) {
    const std::size_t N = 1 + rng() % 200, d = 1 + rng() % 12;
    Tensor data = oracle::random_tensor({N, d}, rng, -3.0, 3.0);
    // Uneven column scales give distinct eigenvalues.
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < d; ++j) data.at(i, j) *= 1.0 + static_cast<double>(j);
    }
    worst = std::max(worst, pca_reconstruction_gap(data));
  }
  return worst;
}

}  // namespace invariants
