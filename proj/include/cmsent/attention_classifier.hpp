#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "cmsent/numerics.hpp"
#include "cmsent/tensor.hpp"

namespace cmsent {

inline constexpr std::size_t kDefaultHiddenSize = 64;
inline constexpr double kForgetGateBias = 1.0;

struct BiLstmParams {
  LstmParams forward;   // reads positions left to right
  LstmParams backward;  // reads positions right to left
  Tensor fc_W;          // [3 x 2H]
  Tensor fc_b;          // [3]

  std::size_t hidden() const { return forward.hidden(); }
};

/// Uniform [-0.1, 0.1] weights, zero biases except the forget gate at 1.0.
BiLstmParams init_bilstm(std::size_t dim, std::size_t hidden, std::mt19937_64& rng);
BiLstmParams zeros_like(const BiLstmParams& params);

struct AttnOutput {
  Tensor K;       // [n x 2H] annotations, forward half first
  Tensor e;       // [n] scores against the last real annotation
  Tensor a;       // [n] attention weights
  Tensor h;       // [2H] sentence vector before the FC layer
  Tensor logits;  // [3]
  Tensor p_att;   // [3]
};

/// Indices of the true entries of `mask`, in order.
std::vector<std::size_t> real_positions(const std::vector<bool>& mask);

/// Runs both cells over the real positions only, from zero states, and
/// stacks k_i = [forward h_i ; backward h_i].
Tensor bilstm_annotate(const Tensor& x, const std::vector<bool>& mask, const BiLstmParams& params);

struct Attention {
  Tensor e;
  Tensor a;
  Tensor h;
};

/// e_i = k_i . k_n, a = softmax(e), h = sum_i a_i k_i.
Attention attend(const Tensor& K);

/// Gradient of the annotations given dL/dh.
Tensor attend_backward(const Tensor& K, const Attention& att, const Tensor& dh);

AttnOutput attn_forward(const Tensor& x, const std::vector<bool>& mask, const BiLstmParams& params);

struct AttnTrace {
  std::vector<std::size_t> positions;
  std::vector<LstmStep> forward_steps;
  std::vector<LstmStep> backward_steps;  // backward_steps[j] consumed positions[n-1-j]
  Tensor K;
  Attention attention;
  Tensor fc_input;
  Tensor dropout;
  std::size_t rows = 0;
  std::size_t dim = 0;
};

/// As attn_forward, recording a trace; `dropout` (if non-empty) scales h
/// before the FC layer.
AttnOutput attn_forward(const Tensor& x, const std::vector<bool>& mask, const BiLstmParams& params,
                        AttnTrace& trace, const Tensor& dropout);

/// Accumulates parameter gradients into `grads`; returns dL/dx.
Tensor attn_backward(const AttnTrace& trace, const BiLstmParams& params, const Tensor& dlogits, BiLstmParams& grads);

}  // namespace cmsent
