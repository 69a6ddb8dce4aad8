#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmsent/config.hpp"
#include "cmsent/errors.hpp"
#include "cmsent/model.hpp"

namespace cmsent {

/// Adam with bias-corrected moments. The pad embedding row and frozen
/// embedding tables are never updated.
class Adam {
 public:
  Adam(const JointModel& model, const TrainConfig& config);

  void step(JointModel& model, const JointModel& grads);
  std::size_t steps() const noexcept { return steps_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t steps_ = 0;
  JointModel m_;
  JointModel v_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_weighted_f1 = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  JointModel model;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_score = -1.0;
};

/// Called once per finished epoch.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Mean over the batch of cross_entropy(p_cnn) + cross_entropy(p_att); no dropout.
double batch_loss(const JointModel& model, const std::vector<EncodedTweet>& batch);

/// Seeded per-epoch shuffling, mini-batch Adam on the joint loss, early
/// stopping on validation weighted F1. Throws ValueError for an empty or
/// unlabeled training set and NumericError on a non-finite batch loss.
TrainResult train(const std::vector<EncodedTweet>& train_set, const std::vector<EncodedTweet>& val_set,
                  const TrainConfig& config, JointModel initial, const EpochCallback& on_epoch = {});

/// Ensemble accuracy over a labeled set.
double accuracy(const JointModel& model, const std::vector<EncodedTweet>& data, EnsembleMode mode);

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

// ---- checkpoints --------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

/// Preprocessing settings a checkpoint needs to encode new text identically.
struct PipelineInfo {
  std::string vocab_path;
  std::string translit_rules_path;  // empty: identity transliteration
  Lang translit_lang = Lang::lang2;

  bool operator==(const PipelineInfo&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  PipelineInfo pipeline;
  std::string vocab_hash;
  std::size_t epoch = 0;
  double best_score = 0.0;
  JointModel model;
};

/// Magic, little-endian header length, JSON header, then every parameter
/// tensor as raw little-endian float64 in header order.
void save_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws LoadError on a bad magic, version, header or truncated payload.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

class VocabMismatch : public LoadError {
 public:
  using LoadError::LoadError;
};

/// Throws VocabMismatch when the vocabulary fingerprint differs from the one
/// recorded at training time, unless `force`; returns a warning otherwise.
std::string check_vocab(const Checkpoint& checkpoint, const BpeVocab& vocab, bool force);

}  // namespace cmsent
