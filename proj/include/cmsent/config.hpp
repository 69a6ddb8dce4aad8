#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "cmsent/attention_classifier.hpp"
#include "cmsent/cnn_classifier.hpp"
#include "cmsent/embedding.hpp"
#include "cmsent/ensemble.hpp"
#include "cmsent/preprocess.hpp"

namespace cmsent {

struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout_rate = 0.2;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t vocab_size = kDefaultVocabSize;
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  std::size_t hidden_size = kDefaultHiddenSize;
  std::size_t filter_count = kDefaultFilterCount;
  bool share_embedding = false;
  EnsembleMode ensemble_mode = EnsembleMode::product;
  std::size_t early_stop_patience = 5;

  /// Throws ValueError naming the first offending field.
  void validate() const;

  /// Flat JSON object, one key per field.
  std::string to_json() const;
  /// Starts from defaults and applies the keys present; unknown keys raise ValueError.
  static TrainConfig from_json(std::string_view json);
  static TrainConfig from_json_file(const std::string& path);

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace cmsent
