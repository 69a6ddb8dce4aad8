#pragma once

// The 32-tweet synthetic training fixture, preprocessed and encoded.

#include <filesystem>
#include <vector>

#include "cmsent/config.hpp"
#include "cmsent/model.hpp"
#include "cmsent/preprocess.hpp"

namespace fixture {

inline std::filesystem::path toy_path() { return std::filesystem::path(CMSENT_TEST_DATA) / "toy_train.txt"; }

inline std::vector<cmsent::CleanTweet> toy_clean() {
  std::vector<cmsent::CleanTweet> out;
  for (const auto& raw : cmsent::parse_corpus(toy_path())) {
    out.push_back(cmsent::preprocess(raw, nullptr, cmsent::Lang::lang2));
  }
  return out;
}

struct Encoded {
  cmsent::BpeVocab vocab;
  std::vector<cmsent::EncodedTweet> data;
};

inline Encoded toy(const cmsent::TrainConfig& config) {
  const auto clean = toy_clean();
  auto vocab = cmsent::BpeVocab::train(clean, config.vocab_size);
  auto data = cmsent::encode_corpus(clean, vocab, config.max_len);
  return {std::move(vocab), std::move(data)};
}

/// Small dimensions so unit tests stay fast.
inline cmsent::TrainConfig small_config() {
  cmsent::TrainConfig c;
  c.embedding_dim = 8;
  c.hidden_size = 6;
  c.filter_count = 4;
  c.batch_size = 8;
  c.epochs = 3;
  return c;
}

}  // namespace fixture
