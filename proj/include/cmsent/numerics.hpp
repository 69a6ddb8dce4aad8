#pragma once

// Forward and backward kernels for the fixed set of layers the two
// classifiers are assembled from. Every backward function returns gradients
// with exactly the shapes of the quantities they differentiate.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cmsent/tensor.hpp"

namespace cmsent {

// ---- fully connected ----------------------------------------------------

/// out[j] = sum_i W[j,i] * x[i] + b[j]
Tensor linear_forward(const Tensor& x, const Tensor& W, const Tensor& b);

struct LinearGrads {
  Tensor dx;
  Tensor dW;
  Tensor db;
};

LinearGrads linear_backward(const Tensor& x, const Tensor& W, const Tensor& dout);

// ---- 1-D convolution ----------------------------------------------------

/// Valid convolution, stride 1: x is [T x D], filters [F x w x D], bias [F];
/// result is [(T - w + 1) x F]. Throws SequenceError when T < w.
Tensor conv1d_forward(const Tensor& x, const Tensor& filters, const Tensor& bias);

struct Conv1dGrads {
  Tensor dx;
  Tensor dfilters;
  Tensor dbias;
};

Conv1dGrads conv1d_backward(const Tensor& x, const Tensor& filters, const Tensor& dout);

// ---- max over time ------------------------------------------------------

struct MaxPool {
  Tensor values;                     // [F]
  std::vector<std::size_t> argmax;  // per feature, smallest index among ties
};

MaxPool max_over_time(const Tensor& featmap);

/// Routes dout[f] to row argmax[f] of an [rows x F] gradient.
Tensor max_over_time_backward(const Tensor& dout, std::span<const std::size_t> argmax, std::size_t rows);

// ---- activations --------------------------------------------------------

Tensor relu(const Tensor& x);
/// Subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& x, const Tensor& dout);

double sigmoid(double v);

/// Max-shifted softmax over a rank-1 tensor.
Tensor softmax(const Tensor& z);
Tensor softmax_backward(const Tensor& probs, const Tensor& dout);

// ---- loss ---------------------------------------------------------------

inline constexpr double kProbabilityFloor = 1e-12;

/// -ln(max(probs[gold], 1e-12)); IndexError when gold is out of range.
double cross_entropy(const Tensor& probs, std::size_t gold);

/// Gradient of cross_entropy(softmax(z), gold) with respect to z: probs - onehot(gold).
Tensor softmax_cross_entropy_backward(const Tensor& probs, std::size_t gold);

// ---- LSTM cell ----------------------------------------------------------

/// Gate rows of W and b are stacked in the order input, forget, cell, output.
/// W is [4H x (D + H)] acting on the concatenation [x; h_prev].
struct LstmParams {
  Tensor W;
  Tensor b;

  std::size_t hidden() const { return b.size() / 4; }
  std::size_t input() const { return W.dim(1) - hidden(); }
};

struct LstmStep {
  Tensor h;
  Tensor c;
  // Saved activations for backward.
  Tensor input;   // [D + H] concatenation of x and h_prev
  Tensor gates;   // [4H] post-nonlinearity i, f, g, o
  Tensor c_prev;
  Tensor tanh_c;
};

LstmStep lstm_cell_forward(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmParams& params);

struct LstmStepGrads {
  Tensor dx;
  Tensor dh_prev;
  Tensor dc_prev;
};

/// Accumulates parameter gradients into dW/db and returns the input gradients.
LstmStepGrads lstm_cell_backward(const LstmStep& step, const LstmParams& params, const Tensor& dh, const Tensor& dc,
                                 Tensor& dW, Tensor& db);

// ---- embedding ----------------------------------------------------------

/// Row gather: table [V x D], ids of length T -> [T x D]. IndexError on id >= V.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

/// Scatter-adds rows of dout into dtable; repeated ids accumulate.
void embedding_backward(std::span<const std::size_t> ids, const Tensor& dout, Tensor& dtable);

// ---- finite differences -------------------------------------------------

using Objective = std::function<double(const std::vector<Tensor>&)>;

/// Identifies the smooth piece of a piecewise-smooth objective, e.g. the
/// max-pool argmax positions and ReLU signs of a forward pass.
using PieceSignature = std::function<std::vector<std::int64_t>(const std::vector<Tensor>&)>;

enum class Stencil {
  two_point,   // (f(x+h) - f(x-h)) / 2h
  four_point,  // (8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h
  six_point,   // (45 d1 - 9 d2 + d3) / 60h with dk = f(x+kh) - f(x-kh)
};

struct GradCheckOptions {
  double eps = 1e-6;
  Stencil stencil = Stencil::two_point;
  /// When set, a probe whose stencil leaves the piece of `inputs` is retried
  /// with half the step down to `min_eps`; coordinates still straddling a
  /// kink there are skipped as tie points.
  PieceSignature piece;
  double min_eps = 1e-9;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;  // tie points
};

/// Max over all coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
/// with numeric gradients from central differences of `objective` at `inputs`.
double grad_check(const Objective& objective, const std::vector<Tensor>& inputs,
                  const std::vector<Tensor>& analytic, double eps = 1e-6);

GradCheckReport grad_check(const Objective& objective, const std::vector<Tensor>& inputs,
                           const std::vector<Tensor>& analytic, const GradCheckOptions& options);

}  // namespace cmsent
