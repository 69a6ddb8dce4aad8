#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "cmsent/tensor.hpp"

namespace cmsent {

inline constexpr std::array<std::size_t, 3> kFilterWidths = {2, 3, 4};
inline constexpr std::size_t kDefaultFilterCount = 64;

struct ConvBank {
  Tensor filters;  // [F x w x D]
  Tensor bias;     // [F]

  std::size_t width() const { return filters.dim(1); }
};

// Banks are stored in width order 2, 3, 4; the FC layer reads their pooled
// vectors concatenated in that order.
struct CnnParams {
  std::array<ConvBank, 3> banks;
  Tensor fc_W;  // [3 x 3F]
  Tensor fc_b;  // [3]

  std::size_t filters_per_width() const { return banks[0].bias.size(); }
};

CnnParams init_cnn(std::size_t dim, std::size_t filters, std::mt19937_64& rng);
CnnParams zeros_like(const CnnParams& params);

struct CnnOutput {
  Tensor pooled;  // [3F], sentence vector before the FC layer
  Tensor logits;  // [3]
  Tensor p_cnn;   // [3]
};

// Saved activations for one forward pass.
struct CnnTrace {
  struct Bank {
    Tensor window;  // [max(n, w) x D] input rows actually convolved
    Tensor pre;     // conv output before ReLU
    std::vector<std::size_t> argmax;
  };
  std::array<Bank, 3> banks;
  Tensor fc_input;  // pooled after dropout
  Tensor dropout;   // per-unit scale, empty when no dropout was applied
  std::size_t n = 0;
  std::size_t rows = 0;
  std::size_t dim = 0;
};

/// Convolve the first n rows of x with each bank (zero rows appended when
/// n < w), ReLU, max over time, concatenate, FC, softmax.
CnnOutput cnn_forward(const Tensor& x, const CnnParams& params, std::size_t n);

/// Same as cnn_forward, recording a trace; `dropout` (if non-empty) scales
/// the pooled vector before the FC layer.
CnnOutput cnn_forward(const Tensor& x, const CnnParams& params, std::size_t n, CnnTrace& trace,
                      const Tensor& dropout);

/// Accumulates parameter gradients into `grads`; returns dL/dx with the
/// shape of the forward input.
Tensor cnn_backward(const CnnTrace& trace, const CnnParams& params, const Tensor& dlogits, CnnParams& grads);

}  // namespace cmsent
