#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cmsent/attention_classifier.hpp"
#include "cmsent/cnn_classifier.hpp"
#include "cmsent/config.hpp"
#include "cmsent/embedding.hpp"
#include "cmsent/ensemble.hpp"
#include "cmsent/preprocess.hpp"

namespace cmsent {

/// The CNN and self-attention components with their embedding tables. When
/// `shared_embedding` is set both components read `cnn_embedding` and
/// `att_embedding` stays empty.
struct JointModel {
  EmbeddingTable cnn_embedding;
  EmbeddingTable att_embedding;
  bool shared_embedding = false;
  CnnParams cnn;
  BiLstmParams attention;

  const EmbeddingTable& attention_embedding() const { return shared_embedding ? cnn_embedding : att_embedding; }
};

/// Fresh model for a vocabulary of `vocab_size` ids. Embeddings are seeded
/// from config.seed; `cnn_table` replaces the CNN (or shared) table when given.
JointModel init_model(const TrainConfig& config, std::size_t vocab_size,
                      std::optional<EmbeddingTable> cnn_table = std::nullopt);

/// Same structure, every tensor zero.
JointModel zeros_like(const JointModel& model);

/// Named view of every parameter tensor in a fixed order. The second
/// embedding is omitted when shared.
std::vector<std::pair<std::string, Tensor*>> parameter_list(JointModel& model);
std::vector<std::pair<std::string, const Tensor*>> parameter_list(const JointModel& model);

struct EncodedTweet {
  std::string uid;
  SubwordSequence seq;
  std::optional<Label> label;
};

std::vector<EncodedTweet> encode_corpus(const std::vector<CleanTweet>& tweets, const BpeVocab& vocab,
                                        std::size_t max_len);

/// Drops trailing positions so the sequence has length `length` (>= n).
SubwordSequence trim(const SubwordSequence& seq, std::size_t length);

struct ModelOutput {
  CnnOutput cnn;
  AttnOutput attention;
  Prediction prediction;
};

ModelOutput run_model(const JointModel& model, const SubwordSequence& seq, EnsembleMode mode);

struct ExampleLoss {
  double cnn = 0.0;
  double attention = 0.0;

  double total() const { return cnn + attention; }
};

/// Forward with dropout drawn from `rng`, then backward of
/// cross_entropy(p_cnn) + cross_entropy(p_att); gradients are multiplied by
/// `scale` and added into `grads`.
ExampleLoss accumulate_gradients(const JointModel& model, const SubwordSequence& seq, Label gold,
                                 double dropout_rate, std::mt19937_64& rng, JointModel& grads, double scale);

}  // namespace cmsent
