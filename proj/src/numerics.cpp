#include "cmsent/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "cmsent/errors.hpp"

namespace cmsent {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* name) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(name) + " must have rank " + std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
  }
}

[[noreturn]] void mismatch(const char* context, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(context) + ": shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()) + " do not conform");
}

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
  require_rank(W, 2, "linear weight");
  if (x.rank() != 1 || W.dim(1) != x.size()) mismatch("linear_forward", W, x);
  if (b.rank() != 1 || b.size() != W.dim(0)) mismatch("linear_forward", W, b);
  const std::size_t n_out = W.dim(0);
  const std::size_t n_in = W.dim(1);
  Tensor out({n_out});
  for (std::size_t j = 0; j < n_out; ++j) {
    double acc = b[j];
    const auto w = W.row(j);
    for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
    out[j] = acc;
  }
  return out;
}

LinearGrads linear_backward(const Tensor& x, const Tensor& W, const Tensor& dout) {
  if (dout.size() != W.dim(0)) mismatch("linear_backward", W, dout);
  const std::size_t n_out = W.dim(0);
  const std::size_t n_in = W.dim(1);
  LinearGrads g{Tensor({n_in}), Tensor(W.shape()), Tensor({n_out})};
  for (std::size_t j = 0; j < n_out; ++j) {
    const double d = dout[j];
    g.db[j] = d;
    if (d == 0.0) continue;
    const auto w = W.row(j);
    auto dw = g.dW.row(j);
    for (std::size_t i = 0; i < n_in; ++i) {
      dw[i] = d * x[i];
      g.dx[i] += d * w[i];
    }
  }
  return g;
}

Tensor conv1d_forward(const Tensor& x, const Tensor& filters, const Tensor& bias) {
  require_rank(x, 2, "conv1d input");
  require_rank(filters, 3, "conv1d filters");
  const std::size_t T = x.dim(0);
  const std::size_t D = x.dim(1);
  const std::size_t F = filters.dim(0);
  const std::size_t w = filters.dim(1);
  if (filters.dim(2) != D) mismatch("conv1d_forward", filters, x);
  if (bias.rank() != 1 || bias.size() != F) mismatch("conv1d_forward", filters, bias);
  if (T < w) {
    throw SequenceError("conv1d_forward: sequence length " + std::to_string(T) + " shorter than filter width " +
                        std::to_string(w));
  }
  const std::size_t L = T - w + 1;
  const std::size_t span_len = w * D;
  Tensor out({L, F});
  const double* xs = x.data().data();
  const double* fs = filters.data().data();
  for (std::size_t t = 0; t < L; ++t) {
    // Rows t..t+w-1 are contiguous, so each window is a flat dot product.
    const double* window = xs + t * D;
    for (std::size_t f = 0; f < F; ++f) {
      const double* filt = fs + f * span_len;
      double acc = bias[f];
      for (std::size_t k = 0; k < span_len; ++k) acc += filt[k] * window[k];
      out.at(t, f) = acc;
    }
  }
  return out;
}

Conv1dGrads conv1d_backward(const Tensor& x, const Tensor& filters, const Tensor& dout) {
  const std::size_t D = x.dim(1);
  const std::size_t F = filters.dim(0);
  const std::size_t w = filters.dim(1);
  const std::size_t L = x.dim(0) - w + 1;
  if (dout.rank() != 2 || dout.dim(0) != L || dout.dim(1) != F) mismatch("conv1d_backward", dout, filters);
  const std::size_t span_len = w * D;
  Conv1dGrads g{Tensor(x.shape()), Tensor(filters.shape()), Tensor({F})};
  const double* xs = x.data().data();
  const double* fs = filters.data().data();
  double* dxs = g.dx.data().data();
  double* dfs = g.dfilters.data().data();
  for (std::size_t t = 0; t < L; ++t) {
    const double* window = xs + t * D;
    double* dwindow = dxs + t * D;
    for (std::size_t f = 0; f < F; ++f) {
      const double d = dout.at(t, f);
      if (d == 0.0) continue;
      g.dbias[f] += d;
      const double* filt = fs + f * span_len;
      double* dfilt = dfs + f * span_len;
      for (std::size_t k = 0; k < span_len; ++k) {
        dfilt[k] += d * window[k];
        dwindow[k] += d * filt[k];
      }
    }
  }
  return g;
}

MaxPool max_over_time(const Tensor& featmap) {
  if (featmap.size() == 0 || featmap.rank() != 2) {
    throw SequenceError("max_over_time: empty feature map");
  }
  const std::size_t L = featmap.dim(0);
  const std::size_t F = featmap.dim(1);
  MaxPool pool{Tensor({F}), std::vector<std::size_t>(F, 0)};
  for (std::size_t f = 0; f < F; ++f) pool.values[f] = featmap.at(0, f);
  for (std::size_t t = 1; t < L; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const double v = featmap.at(t, f);
      if (v > pool.values[f]) {
        pool.values[f] = v;
        pool.argmax[f] = t;
      }
    }
  }
  return pool;
}

Tensor max_over_time_backward(const Tensor& dout, std::span<const std::size_t> argmax, std::size_t rows) {
  const std::size_t F = dout.size();
  if (argmax.size() != F) throw DimensionError("max_over_time_backward: argmax length does not match gradient");
  Tensor d({rows, F});
  for (std::size_t f = 0; f < F; ++f) d.at(argmax[f], f) = dout[f];
  return d;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& dout) {
  require_same_shape(x, dout, "relu_backward");
  Tensor d(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] > 0.0 ? dout[i] : 0.0;
  return d;
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Tensor softmax(const Tensor& z) {
  if (z.size() == 0) throw SequenceError("softmax: empty input");
  const double m = *std::max_element(z.data().begin(), z.data().end());
  Tensor out(z.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    total += out[i];
  }
  for (double& v : out.data()) v /= total;
  return out;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& dout) {
  require_same_shape(probs, dout, "softmax_backward");
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * dout[i];
  Tensor d(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) d[i] = probs[i] * (dout[i] - dot);
  return d;
}

double cross_entropy(const Tensor& probs, std::size_t gold) {
  if (gold >= probs.size()) {
    throw IndexError("cross_entropy: gold class " + std::to_string(gold) + " out of range for " +
                     std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[gold], kProbabilityFloor));
}

Tensor softmax_cross_entropy_backward(const Tensor& probs, std::size_t gold) {
  if (gold >= probs.size()) throw IndexError("softmax_cross_entropy_backward: gold class out of range");
  Tensor d = probs;
  d[gold] -= 1.0;
  return d;
}

LstmStep lstm_cell_forward(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmParams& params) {
  const std::size_t H = params.hidden();
  const std::size_t D = x.size();
  if (params.W.rank() != 2 || params.W.dim(0) != 4 * H || params.W.dim(1) != D + H) {
    mismatch("lstm_cell_forward", params.W, x);
  }
  if (h_prev.size() != H) mismatch("lstm_cell_forward", params.b, h_prev);
  if (c_prev.size() != H) mismatch("lstm_cell_forward", params.b, c_prev);

  LstmStep s;
  s.input = Tensor({D + H});
  std::copy(x.data().begin(), x.data().end(), s.input.data().begin());
  std::copy(h_prev.data().begin(), h_prev.data().end(), s.input.data().begin() + static_cast<std::ptrdiff_t>(D));

  s.gates = linear_forward(s.input, params.W, params.b);
  for (std::size_t k = 0; k < 4 * H; ++k) {
    const bool is_cell = k >= 2 * H && k < 3 * H;
    s.gates[k] = is_cell ? std::tanh(s.gates[k]) : sigmoid(s.gates[k]);
  }
  s.c_prev = c_prev;
  s.c = Tensor({H});
  s.h = Tensor({H});
  s.tanh_c = Tensor({H});
  for (std::size_t j = 0; j < H; ++j) {
    const double i = s.gates[j];
    const double f = s.gates[H + j];
    const double g = s.gates[2 * H + j];
    const double o = s.gates[3 * H + j];
    s.c[j] = f * c_prev[j] + i * g;
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = o * s.tanh_c[j];
  }
  return s;
}

LstmStepGrads lstm_cell_backward(const LstmStep& step, const LstmParams& params, const Tensor& dh, const Tensor& dc,
                                 Tensor& dW, Tensor& db) {
  const std::size_t H = params.hidden();
  const std::size_t DH = step.input.size();
  const std::size_t D = DH - H;
  require_same_shape(dW, params.W, "lstm_cell_backward");
  require_same_shape(db, params.b, "lstm_cell_backward");

  Tensor dpre({4 * H});
  Tensor dc_prev({H});
  for (std::size_t j = 0; j < H; ++j) {
    const double i = step.gates[j];
    const double f = step.gates[H + j];
    const double g = step.gates[2 * H + j];
    const double o = step.gates[3 * H + j];
    const double tc = step.tanh_c[j];
    const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
    dpre[j] = dct * g * i * (1.0 - i);
    dpre[H + j] = dct * step.c_prev[j] * f * (1.0 - f);
    dpre[2 * H + j] = dct * i * (1.0 - g * g);
    dpre[3 * H + j] = dh[j] * tc * o * (1.0 - o);
    dc_prev[j] = dct * f;
  }

  Tensor dinput({DH});
  for (std::size_t k = 0; k < 4 * H; ++k) {
    const double d = dpre[k];
    db[k] += d;
    if (d == 0.0) continue;
    const auto w = params.W.row(k);
    auto dw = dW.row(k);
    for (std::size_t m = 0; m < DH; ++m) {
      dw[m] += d * step.input[m];
      dinput[m] += d * w[m];
    }
  }

  LstmStepGrads g{Tensor({D}), Tensor({H}), std::move(dc_prev)};
  std::copy_n(dinput.data().begin(), D, g.dx.data().begin());
  std::copy_n(dinput.data().begin() + static_cast<std::ptrdiff_t>(D), H, g.dh_prev.data().begin());
  return g;
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "embedding table");
  const std::size_t V = table.dim(0);
  const std::size_t D = table.dim(1);
  if (ids.empty()) throw SequenceError("embedding_lookup: empty id list");
  Tensor out({ids.size(), D});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= V) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[t]) + " out of vocabulary of size " +
                       std::to_string(V));
    }
    const auto src = table.row(ids[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

void embedding_backward(std::span<const std::size_t> ids, const Tensor& dout, Tensor& dtable) {
  if (dout.rank() != 2 || dout.dim(0) != ids.size() || dout.dim(1) != dtable.dim(1)) {
    mismatch("embedding_backward", dout, dtable);
  }
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= dtable.dim(0)) throw IndexError("embedding_backward: id " + std::to_string(ids[t]) + " out of range");
    const auto src = dout.row(t);
    auto dst = dtable.row(ids[t]);
    for (std::size_t d = 0; d < src.size(); ++d) dst[d] += src[d];
  }
}

double grad_check(const Objective& objective, const std::vector<Tensor>& inputs, const std::vector<Tensor>& analytic,
                  double eps) {
  GradCheckOptions options;
  options.eps = eps;
  return grad_check(objective, inputs, analytic, options).max_relative_error;
}

GradCheckReport grad_check(const Objective& objective, const std::vector<Tensor>& inputs,
                           const std::vector<Tensor>& analytic, const GradCheckOptions& options) {
  if (analytic.size() != inputs.size()) throw DimensionError("grad_check: one analytic gradient per input required");
  if (!(options.eps > 0.0)) throw ValueError("grad_check: eps must be positive");
  const auto base_piece = options.piece ? options.piece(inputs) : std::vector<std::int64_t>{};
  const std::size_t reach = options.stencil == Stencil::two_point ? 1 : options.stencil == Stencil::four_point ? 2 : 3;

  std::vector<Tensor> probe = inputs;
  GradCheckReport report;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    require_same_shape(inputs[k], analytic[k], "grad_check");
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double orig = probe[k][i];
      std::optional<double> numeric;
      for (double h = options.eps; !numeric; h /= 2) {
        double d[4] = {0.0, 0.0, 0.0, 0.0};  // d[j] = f(x + jh) - f(x - jh)
        bool same_piece = true;
        for (std::size_t j = 1; j <= reach; ++j) {
          for (double sign : {1.0, -1.0}) {
            probe[k][i] = orig + sign * static_cast<double>(j) * h;
            d[j] += sign * objective(probe);
            if (options.piece && options.piece(probe) != base_piece) same_piece = false;
          }
        }
        probe[k][i] = orig;
        if (same_piece) {
          switch (options.stencil) {
            case Stencil::two_point: numeric = d[1] / (2.0 * h); break;
            case Stencil::four_point: numeric = (8.0 * d[1] - d[2]) / (12.0 * h); break;
            case Stencil::six_point: numeric = (45.0 * d[1] - 9.0 * d[2] + d[3]) / (60.0 * h); break;
          }
        } else if (h / 2 < options.min_eps) {
          break;
        }
      }
      ++report.coordinates;
      if (!numeric) {
        ++report.skipped;
        continue;
      }
      const double a = analytic[k][i];
      const double err = std::abs(a - *numeric) / std::max(1e-8, std::abs(a) + std::abs(*numeric));
      report.max_relative_error = std::max(report.max_relative_error, err);
    }
  }
  return report;
}

}  // namespace cmsent
