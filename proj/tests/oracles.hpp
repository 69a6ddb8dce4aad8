#pragma once

// Independent reference implementations used by the tests. None of these
// call into the kernels they are used to check.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cmsent/attention_classifier.hpp"
#include "cmsent/cnn_classifier.hpp"
#include "cmsent/numerics.hpp"
#include "cmsent/tensor.hpp"

namespace oracle {

using cmsent::Tensor;

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// out[t][f] = bias[f] + sum_j sum_d filters[f][j][d] * x[t + j][d]
inline Tensor naive_conv(const Tensor& x, const Tensor& filters, const Tensor& bias) {
  const std::size_t T = x.shape()[0], D = x.shape()[1];
  const std::size_t F = filters.shape()[0], w = filters.shape()[1];
  Tensor out({T - w + 1, F});
  for (std::size_t t = 0; t + w <= T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      double acc = bias[f];
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t d = 0; d < D; ++d) acc += filters[(f * w + j) * D + d] * x[(t + j) * D + d];
      }
      out[t * F + f] = acc;
    }
  }
  return out;
}

inline std::vector<double> naive_softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> out;
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  for (double v : z) out.push_back(std::exp(v - m) / s);
  return out;
}

// Plain central differences of f at every coordinate of every input.
inline std::vector<Tensor> numeric_gradients(const cmsent::Objective& f, std::vector<Tensor> inputs, double eps = 1e-6) {
  std::vector<Tensor> grads;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor g(inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + eps;
      const double up = f(inputs);
      inputs[k][i] = orig - eps;
      const double down = f(inputs);
      inputs[k][i] = orig;
      g[i] = (up - down) / (2 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---- parameter packing for end-to-end checks ----------------------------

inline std::vector<Tensor> pack(const cmsent::CnnParams& p) {
  std::vector<Tensor> v;
  for (const auto& b : p.banks) {
    v.push_back(b.filters);
    v.push_back(b.bias);
  }
  v.push_back(p.fc_W);
  v.push_back(p.fc_b);
  return v;
}

inline cmsent::CnnParams unpack_cnn(const std::vector<Tensor>& v, std::size_t offset) {
  cmsent::CnnParams p;
  for (std::size_t b = 0; b < 3; ++b) {
    p.banks[b].filters = v[offset + 2 * b];
    p.banks[b].bias = v[offset + 2 * b + 1];
  }
  p.fc_W = v[offset + 6];
  p.fc_b = v[offset + 7];
  return p;
}

inline std::vector<Tensor> pack(const cmsent::BiLstmParams& p) {
  return {p.forward.W, p.forward.b, p.backward.W, p.backward.b, p.fc_W, p.fc_b};
}

inline cmsent::BiLstmParams unpack_bilstm(const std::vector<Tensor>& v, std::size_t offset) {
  cmsent::BiLstmParams p;
  p.forward = {v[offset], v[offset + 1]};
  p.backward = {v[offset + 2], v[offset + 3]};
  p.fc_W = v[offset + 4];
  p.fc_b = v[offset + 5];
  return p;
}

inline cmsent::CnnParams random_cnn(std::size_t D, std::size_t F, std::mt19937_64& rng) {
  cmsent::CnnParams p;
  for (std::size_t b = 0; b < 3; ++b) {
    p.banks[b].filters = random_tensor({F, cmsent::kFilterWidths[b], D}, rng);
    p.banks[b].bias = random_tensor({F}, rng);
  }
  p.fc_W = random_tensor({3, 3 * F}, rng);
  p.fc_b = random_tensor({3}, rng);
  return p;
}

inline cmsent::BiLstmParams random_bilstm(std::size_t D, std::size_t H, std::mt19937_64& rng) {
  cmsent::BiLstmParams p;
  p.forward = {random_tensor({4 * H, D + H}, rng), random_tensor({4 * H}, rng)};
  p.backward = {random_tensor({4 * H, D + H}, rng), random_tensor({4 * H}, rng)};
  p.fc_W = random_tensor({3, 2 * H}, rng);
  p.fc_b = random_tensor({3}, rng);
  return p;
}

// Argmax position and ReLU sign of every pooled unit: constant on each
// smooth piece of the CNN objective.
inline std::vector<std::int64_t> cnn_piece(const cmsent::CnnTrace& trace) {
  std::vector<std::int64_t> sig;
  for (const auto& bank : trace.banks) {
    const std::size_t F = bank.argmax.size();
    for (std::size_t f = 0; f < F; ++f) {
      sig.push_back(static_cast<std::int64_t>(bank.argmax[f]));
      sig.push_back(bank.pre[bank.argmax[f] * F + f] > 0.0);
    }
  }
  return sig;
}

// ---- symmetric eigenvalues (cyclic Jacobi) -------------------------------

inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev;
  for (std::size_t i = 0; i < n; ++i) ev.push_back(a[i][i]);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

// Population covariance of the rows of `data`.
inline std::vector<std::vector<double>> covariance(const Tensor& data) {
  const std::size_t N = data.shape()[0], d = data.shape()[1];
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += data[i * d + j] / static_cast<double>(N);
  }
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        cov[j][k] += (data[i * d + j] - mean[j]) * (data[i * d + k] - mean[k]) / static_cast<double>(N);
      }
    }
  }
  return cov;
}

// ---- BPE merge replay ---------------------------------------------------

// Applies every merge in training order, left to right, to one word.
inline std::vector<std::string> replay_merges(std::vector<std::string> pieces,
                                              const std::vector<std::pair<std::string, std::string>>& merges) {
  for (const auto& [a, b] : merges) {
    std::vector<std::string> next;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (i + 1 < pieces.size() && pieces[i] == a && pieces[i + 1] == b) {
        next.push_back(a + b);
        ++i;
      } else {
        next.push_back(pieces[i]);
      }
    }
    pieces = std::move(next);
  }
  return pieces;
}

}  // namespace oracle
