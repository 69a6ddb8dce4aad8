#include "cmsent/model.hpp"

#include <algorithm>

#include "cmsent/errors.hpp"
#include "cmsent/numerics.hpp"

namespace cmsent {

namespace {

// Embedding rows and classifier weights draw from separate streams so that
// sharing the table does not perturb the classifier initialization.
constexpr std::uint64_t kCnnStream = 0x636e6e;
constexpr std::uint64_t kAttStream = 0x617474;
constexpr std::uint64_t kAttEmbeddingStream = 0x656d62;

Tensor dropout_scale(std::size_t size, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return Tensor();
  Tensor scale({size});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  for (double& v : scale.data()) v = u(rng) < rate ? 0.0 : keep;
  return scale;
}

}  // namespace

JointModel init_model(const TrainConfig& config, std::size_t vocab_size, std::optional<EmbeddingTable> cnn_table) {
  config.validate();
  JointModel m;
  m.shared_embedding = config.share_embedding;
  if (cnn_table) {
    if (cnn_table->vocab_size() != vocab_size || cnn_table->dim() != config.embedding_dim) {
      throw DimensionError("external embedding table " + shape_string(cnn_table->table.shape()) +
                           " does not match vocabulary size and embedding_dim");
    }
    m.cnn_embedding = std::move(*cnn_table);
  } else {
    m.cnn_embedding = init_embedding(vocab_size, config.embedding_dim, config.seed);
  }
  if (!m.shared_embedding) {
    m.att_embedding = init_embedding(vocab_size, config.embedding_dim, config.seed ^ kAttEmbeddingStream,
                                     m.cnn_embedding.trainable);
  }
  std::mt19937_64 cnn_rng(config.seed ^ kCnnStream);
  m.cnn = init_cnn(config.embedding_dim, config.filter_count, cnn_rng);
  std::mt19937_64 att_rng(config.seed ^ kAttStream);
  m.attention = init_bilstm(config.embedding_dim, config.hidden_size, att_rng);
  return m;
}

JointModel zeros_like(const JointModel& model) {
  JointModel z;
  z.shared_embedding = model.shared_embedding;
  z.cnn_embedding = {Tensor(model.cnn_embedding.table.shape()), model.cnn_embedding.trainable};
  if (!model.shared_embedding) z.att_embedding = {Tensor(model.att_embedding.table.shape()), model.att_embedding.trainable};
  z.cnn = zeros_like(model.cnn);
  z.attention = zeros_like(model.attention);
  return z;
}

namespace {

template <typename Model, typename Out>
void list_parameters(Model& m, Out& out) {
  out.emplace_back("cnn_embedding", &m.cnn_embedding.table);
  if (!m.shared_embedding) out.emplace_back("att_embedding", &m.att_embedding.table);
  for (std::size_t b = 0; b < m.cnn.banks.size(); ++b) {
    const std::string prefix = "cnn.conv" + std::to_string(kFilterWidths[b]);
    out.emplace_back(prefix + ".filters", &m.cnn.banks[b].filters);
    out.emplace_back(prefix + ".bias", &m.cnn.banks[b].bias);
  }
  out.emplace_back("cnn.fc.W", &m.cnn.fc_W);
  out.emplace_back("cnn.fc.b", &m.cnn.fc_b);
  out.emplace_back("att.forward.W", &m.attention.forward.W);
  out.emplace_back("att.forward.b", &m.attention.forward.b);
  out.emplace_back("att.backward.W", &m.attention.backward.W);
  out.emplace_back("att.backward.b", &m.attention.backward.b);
  out.emplace_back("att.fc.W", &m.attention.fc_W);
  out.emplace_back("att.fc.b", &m.attention.fc_b);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> parameter_list(JointModel& model) {
  std::vector<std::pair<std::string, Tensor*>> out;
  list_parameters(model, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> parameter_list(const JointModel& model) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  list_parameters(model, out);
  return out;
}

std::vector<EncodedTweet> encode_corpus(const std::vector<CleanTweet>& tweets, const BpeVocab& vocab,
                                        std::size_t max_len) {
  std::vector<EncodedTweet> out;
  out.reserve(tweets.size());
  for (const auto& t : tweets) out.push_back({t.uid, vocab.encode(t, max_len), t.label});
  return out;
}

SubwordSequence trim(const SubwordSequence& seq, std::size_t length) {
  length = std::max(length, seq.n);
  SubwordSequence out;
  out.n = seq.n;
  out.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(std::min(length, seq.ids.size())));
  out.mask.assign(seq.mask.begin(), seq.mask.begin() + static_cast<std::ptrdiff_t>(out.ids.size()));
  return out;
}

ModelOutput run_model(const JointModel& model, const SubwordSequence& seq, EnsembleMode mode) {
  const SubwordSequence s = trim(seq, seq.n);
  ModelOutput out;
  out.cnn = cnn_forward(embed(s, model.cnn_embedding), model.cnn, s.n);
  out.attention = attn_forward(embed(s, model.attention_embedding()), s.mask, model.attention);
  out.prediction = combine(out.cnn.p_cnn, out.attention.p_att, mode);
  return out;
}

ExampleLoss accumulate_gradients(const JointModel& model, const SubwordSequence& seq, Label gold,
                                 double dropout_rate, std::mt19937_64& rng, JointModel& grads, double scale) {
  const std::size_t F3 = model.cnn.fc_W.dim(1);
  const std::size_t H2 = model.attention.fc_W.dim(1);
  const Tensor cnn_drop = dropout_scale(F3, dropout_rate, rng);
  const Tensor att_drop = dropout_scale(H2, dropout_rate, rng);

  const Tensor x_cnn = embed(seq, model.cnn_embedding);
  CnnTrace cnn_trace;
  const CnnOutput cnn = cnn_forward(x_cnn, model.cnn, seq.n, cnn_trace, cnn_drop);

  const Tensor x_att = embed(seq, model.attention_embedding());
  AttnTrace att_trace;
  const AttnOutput att = attn_forward(x_att, seq.mask, model.attention, att_trace, att_drop);

  const std::size_t g = index_of(gold);
  ExampleLoss loss{cross_entropy(cnn.p_cnn, g), cross_entropy(att.p_att, g)};

  Tensor d_cnn = softmax_cross_entropy_backward(cnn.p_cnn, g);
  Tensor d_att = softmax_cross_entropy_backward(att.p_att, g);
  for (double& v : d_cnn.data()) v *= scale;
  for (double& v : d_att.data()) v *= scale;

  const Tensor dx_cnn = cnn_backward(cnn_trace, model.cnn, d_cnn, grads.cnn);
  const Tensor dx_att = attn_backward(att_trace, model.attention, d_att, grads.attention);
  if (model.cnn_embedding.trainable) embed_backward(seq, dx_cnn, grads.cnn_embedding.table);
  if (model.attention_embedding().trainable) {
    Tensor& target = model.shared_embedding ? grads.cnn_embedding.table : grads.att_embedding.table;
    embed_backward(seq, dx_att, target);
  }
  return loss;
}

}  // namespace cmsent
