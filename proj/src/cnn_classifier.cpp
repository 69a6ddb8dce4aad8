#include "cmsent/cnn_classifier.hpp"

#include <algorithm>

#include "cmsent/errors.hpp"
#include "cmsent/labels.hpp"
#include "cmsent/numerics.hpp"

namespace cmsent {

namespace {

constexpr double kInitRange = 0.1;

void fill_uniform(Tensor& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  for (double& v : t.data()) v = dist(rng);
}

}  // namespace

CnnParams init_cnn(std::size_t dim, std::size_t filters, std::mt19937_64& rng) {
  CnnParams p;
  for (std::size_t b = 0; b < kFilterWidths.size(); ++b) {
    p.banks[b].filters = Tensor({filters, kFilterWidths[b], dim});
    p.banks[b].bias = Tensor({filters});
    fill_uniform(p.banks[b].filters, rng);
  }
  p.fc_W = Tensor({kNumClasses, kFilterWidths.size() * filters});
  p.fc_b = Tensor({kNumClasses});
  fill_uniform(p.fc_W, rng);
  return p;
}

CnnParams zeros_like(const CnnParams& params) {
  CnnParams z;
  for (std::size_t b = 0; b < z.banks.size(); ++b) {
    z.banks[b].filters = Tensor(params.banks[b].filters.shape());
    z.banks[b].bias = Tensor(params.banks[b].bias.shape());
  }
  z.fc_W = Tensor(params.fc_W.shape());
  z.fc_b = Tensor(params.fc_b.shape());
  return z;
}

CnnOutput cnn_forward(const Tensor& x, const CnnParams& params, std::size_t n) {
  CnnTrace trace;
  return cnn_forward(x, params, n, trace, Tensor());
}

CnnOutput cnn_forward(const Tensor& x, const CnnParams& params, std::size_t n, CnnTrace& trace,
                      const Tensor& dropout) {
  if (x.rank() != 2) throw DimensionError("cnn_forward: input must be [T x D], got " + shape_string(x.shape()));
  const std::size_t D = x.dim(1);
  const std::size_t F = params.filters_per_width();
  n = std::min(n, x.dim(0));
  if (n == 0) throw SequenceError("cnn_forward: no real positions");

  trace.n = n;
  trace.rows = x.dim(0);
  trace.dim = D;
  CnnOutput out{Tensor({kFilterWidths.size() * F}), Tensor(), Tensor()};
  for (std::size_t b = 0; b < params.banks.size(); ++b) {
    const ConvBank& bank = params.banks[b];
    auto& tb = trace.banks[b];
    const std::size_t rows = std::max(n, bank.width());
    tb.window = Tensor({rows, D});
    std::copy_n(x.data().begin(), n * D, tb.window.data().begin());
    tb.pre = conv1d_forward(tb.window, bank.filters, bank.bias);
    MaxPool pool = max_over_time(relu(tb.pre));
    tb.argmax = std::move(pool.argmax);
    std::copy(pool.values.data().begin(), pool.values.data().end(),
              out.pooled.data().begin() + static_cast<std::ptrdiff_t>(b * F));
  }
  trace.fc_input = out.pooled;
  trace.dropout = dropout;
  if (dropout.size() != 0) {
    require_same_shape(dropout, out.pooled, "cnn dropout");
    for (std::size_t i = 0; i < out.pooled.size(); ++i) trace.fc_input[i] *= dropout[i];
  }
  out.logits = linear_forward(trace.fc_input, params.fc_W, params.fc_b);
  out.p_cnn = softmax(out.logits);
  return out;
}

Tensor cnn_backward(const CnnTrace& trace, const CnnParams& params, const Tensor& dlogits, CnnParams& grads) {
  const std::size_t F = params.filters_per_width();
  const std::size_t D = trace.dim;
  LinearGrads fc = linear_backward(trace.fc_input, params.fc_W, dlogits);
  grads.fc_W += fc.dW;
  grads.fc_b += fc.db;
  if (trace.dropout.size() != 0) {
    for (std::size_t i = 0; i < fc.dx.size(); ++i) fc.dx[i] *= trace.dropout[i];
  }

  Tensor dx({trace.rows, D});
  for (std::size_t b = 0; b < params.banks.size(); ++b) {
    const auto& tb = trace.banks[b];
    Tensor dpool({F});
    std::copy_n(fc.dx.data().begin() + static_cast<std::ptrdiff_t>(b * F), F, dpool.data().begin());
    const Tensor drelu = max_over_time_backward(dpool, tb.argmax, tb.pre.dim(0));
    const Tensor dpre = relu_backward(tb.pre, drelu);
    Conv1dGrads g = conv1d_backward(tb.window, params.banks[b].filters, dpre);
    grads.banks[b].filters += g.dfilters;
    grads.banks[b].bias += g.dbias;
    // Only the first n window rows came from x; the rest are padding.
    for (std::size_t k = 0; k < trace.n * D; ++k) dx[k] += g.dx[k];
  }
  return dx;
}

}  // namespace cmsent
