#include "cmsent/attention_classifier.hpp"

#include <algorithm>

#include "cmsent/errors.hpp"
#include "cmsent/labels.hpp"

namespace cmsent {

namespace {

constexpr double kInitRange = 0.1;

LstmParams init_cell(std::size_t dim, std::size_t hidden, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  LstmParams cell{Tensor({4 * hidden, dim + hidden}), Tensor({4 * hidden})};
  for (double& v : cell.W.data()) v = dist(rng);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) cell.b[j] = kForgetGateBias;
  return cell;
}

struct Recurrence {
  std::vector<LstmStep> forward;
  std::vector<LstmStep> backward;
};

Recurrence run_cells(const Tensor& x, const std::vector<std::size_t>& positions, const BiLstmParams& params) {
  const std::size_t H = params.hidden();
  const std::size_t D = x.dim(1);
  if (params.forward.input() != D || params.backward.input() != D) {
    throw DimensionError("bilstm: input dim " + std::to_string(D) + " does not match cell input " +
                         std::to_string(params.forward.input()));
  }
  Recurrence r;
  r.forward.reserve(positions.size());
  r.backward.reserve(positions.size());
  auto row_of = [&](std::size_t t) { return Tensor({D}, std::vector<double>(x.row(t).begin(), x.row(t).end())); };

  Tensor h({H}), c({H});
  for (std::size_t t : positions) {
    r.forward.push_back(lstm_cell_forward(row_of(t), h, c, params.forward));
    h = r.forward.back().h;
    c = r.forward.back().c;
  }
  h = Tensor({H});
  c = Tensor({H});
  for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
    r.backward.push_back(lstm_cell_forward(row_of(*it), h, c, params.backward));
    h = r.backward.back().h;
    c = r.backward.back().c;
  }
  return r;
}

Tensor stack_annotations(const Recurrence& r, std::size_t H) {
  const std::size_t n = r.forward.size();
  Tensor K({n, 2 * H});
  for (std::size_t i = 0; i < n; ++i) {
    auto row = K.row(i);
    const Tensor& fh = r.forward[i].h;
    const Tensor& bh = r.backward[n - 1 - i].h;
    std::copy(fh.data().begin(), fh.data().end(), row.begin());
    std::copy(bh.data().begin(), bh.data().end(), row.begin() + static_cast<std::ptrdiff_t>(H));
  }
  return K;
}

}  // namespace

BiLstmParams init_bilstm(std::size_t dim, std::size_t hidden, std::mt19937_64& rng) {
  BiLstmParams p;
  p.forward = init_cell(dim, hidden, rng);
  p.backward = init_cell(dim, hidden, rng);
  p.fc_W = Tensor({kNumClasses, 2 * hidden});
  p.fc_b = Tensor({kNumClasses});
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  for (double& v : p.fc_W.data()) v = dist(rng);
  return p;
}

BiLstmParams zeros_like(const BiLstmParams& params) {
  BiLstmParams z;
  z.forward = {Tensor(params.forward.W.shape()), Tensor(params.forward.b.shape())};
  z.backward = {Tensor(params.backward.W.shape()), Tensor(params.backward.b.shape())};
  z.fc_W = Tensor(params.fc_W.shape());
  z.fc_b = Tensor(params.fc_b.shape());
  return z;
}

std::vector<std::size_t> real_positions(const std::vector<bool>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) out.push_back(t);
  }
  return out;
}

Tensor bilstm_annotate(const Tensor& x, const std::vector<bool>& mask, const BiLstmParams& params) {
  if (x.rank() != 2 || mask.size() != x.dim(0)) {
    throw DimensionError("bilstm_annotate: mask length does not match input " + shape_string(x.shape()));
  }
  const auto positions = real_positions(mask);
  if (positions.empty()) throw SequenceError("bilstm_annotate: no real positions");
  return stack_annotations(run_cells(x, positions, params), params.hidden());
}

Attention attend(const Tensor& K) {
  if (K.rank() != 2 || K.size() == 0) throw SequenceError("attend: empty annotation matrix");
  const std::size_t n = K.dim(0);
  const std::size_t width = K.dim(1);
  const auto last = K.row(n - 1);
  Attention att{Tensor({n}), Tensor(), Tensor({width})};
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = K.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < width; ++j) dot += k[j] * last[j];
    att.e[i] = dot;
  }
  att.a = softmax(att.e);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = K.row(i);
    for (std::size_t j = 0; j < width; ++j) att.h[j] += att.a[i] * k[j];
  }
  return att;
}

Tensor attend_backward(const Tensor& K, const Attention& att, const Tensor& dh) {
  const std::size_t n = K.dim(0);
  const std::size_t width = K.dim(1);
  Tensor dK(K.shape());
  Tensor da({n});
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = K.row(i);
    auto dk = dK.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      dot += dh[j] * k[j];
      dk[j] += att.a[i] * dh[j];
    }
    da[i] = dot;
  }
  const Tensor de = softmax_backward(att.a, da);
  const auto last = K.row(n - 1);
  auto dlast = dK.row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = K.row(i);
    auto dk = dK.row(i);
    for (std::size_t j = 0; j < width; ++j) {
      dk[j] += de[i] * last[j];
      dlast[j] += de[i] * k[j];
    }
  }
  return dK;
}

AttnOutput attn_forward(const Tensor& x, const std::vector<bool>& mask, const BiLstmParams& params) {
  AttnTrace trace;
  return attn_forward(x, mask, params, trace, Tensor());
}

AttnOutput attn_forward(const Tensor& x, const std::vector<bool>& mask, const BiLstmParams& params,
                        AttnTrace& trace, const Tensor& dropout) {
  if (x.rank() != 2 || mask.size() != x.dim(0)) {
    throw DimensionError("attn_forward: mask length does not match input " + shape_string(x.shape()));
  }
  trace.positions = real_positions(mask);
  if (trace.positions.empty()) throw SequenceError("attn_forward: no real positions");
  trace.rows = x.dim(0);
  trace.dim = x.dim(1);
  Recurrence r = run_cells(x, trace.positions, params);
  trace.K = stack_annotations(r, params.hidden());
  trace.forward_steps = std::move(r.forward);
  trace.backward_steps = std::move(r.backward);
  trace.attention = attend(trace.K);
  trace.dropout = dropout;
  trace.fc_input = trace.attention.h;
  if (dropout.size() != 0) {
    require_same_shape(dropout, trace.fc_input, "attention dropout");
    for (std::size_t i = 0; i < trace.fc_input.size(); ++i) trace.fc_input[i] *= dropout[i];
  }

  AttnOutput out;
  out.K = trace.K;
  out.e = trace.attention.e;
  out.a = trace.attention.a;
  out.h = trace.attention.h;
  out.logits = linear_forward(trace.fc_input, params.fc_W, params.fc_b);
  out.p_att = softmax(out.logits);
  return out;
}

Tensor attn_backward(const AttnTrace& trace, const BiLstmParams& params, const Tensor& dlogits, BiLstmParams& grads) {
  const std::size_t H = params.hidden();
  const std::size_t n = trace.positions.size();
  LinearGrads fc = linear_backward(trace.fc_input, params.fc_W, dlogits);
  grads.fc_W += fc.dW;
  grads.fc_b += fc.db;
  if (trace.dropout.size() != 0) {
    for (std::size_t i = 0; i < fc.dx.size(); ++i) fc.dx[i] *= trace.dropout[i];
  }
  const Tensor dK = attend_backward(trace.K, trace.attention, fc.dx);

  Tensor dx({trace.rows, trace.dim});
  auto add_row = [&](std::size_t t, const Tensor& g) {
    auto dst = dx.row(t);
    for (std::size_t d = 0; d < trace.dim; ++d) dst[d] += g[d];
  };

  // Forward cell: step i produced the first half of row i.
  Tensor dh_next({H}), dc_next({H});
  for (std::size_t i = n; i-- > 0;) {
    Tensor dh = dh_next;
    const auto upstream = dK.row(i);
    for (std::size_t j = 0; j < H; ++j) dh[j] += upstream[j];
    LstmStepGrads g = lstm_cell_backward(trace.forward_steps[i], params.forward, dh, dc_next, grads.forward.W,
                                         grads.forward.b);
    add_row(trace.positions[i], g.dx);
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }
  // Backward cell: step j produced the second half of row n-1-j.
  dh_next = Tensor({H});
  dc_next = Tensor({H});
  for (std::size_t j = n; j-- > 0;) {
    const std::size_t row = n - 1 - j;
    Tensor dh = dh_next;
    const auto upstream = dK.row(row);
    for (std::size_t k = 0; k < H; ++k) dh[k] += upstream[H + k];
    LstmStepGrads g = lstm_cell_backward(trace.backward_steps[j], params.backward, dh, dc_next, grads.backward.W,
                                         grads.backward.b);
    add_row(trace.positions[row], g.dx);
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }
  return dx;
}

}  // namespace cmsent
