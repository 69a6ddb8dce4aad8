#include "cmsent/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"

#include "cmsent/evaluation.hpp"

namespace cmsent {

// ---- optimizer ----------------------------------------------------------

Adam::Adam(const JointModel& model, const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      m_(zeros_like(model)),
      v_(zeros_like(model)) {}

void Adam::step(JointModel& model, const JointModel& grads) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto params = parameter_list(model);
  const auto g = parameter_list(grads);
  auto m = parameter_list(m_);
  auto v = parameter_list(v_);

  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string& name = params[k].first;
    Tensor& p = *params[k].second;
    std::size_t begin = 0;
    if (name == "cnn_embedding" || name == "att_embedding") {
      const EmbeddingTable& table = name == "cnn_embedding" ? model.cnn_embedding : model.att_embedding;
      if (!table.trainable) continue;
      begin = table.dim();  // skip the pad row
    }
    const Tensor& gk = *g[k].second;
    Tensor& mk = *m[k].second;
    Tensor& vk = *v[k].second;
    for (std::size_t i = begin; i < p.size(); ++i) {
      mk[i] = beta1_ * mk[i] + (1.0 - beta1_) * gk[i];
      vk[i] = beta2_ * vk[i] + (1.0 - beta2_) * gk[i] * gk[i];
      const double mhat = mk[i] / c1;
      const double vhat = vk[i] / c2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ---- training loop ------------------------------------------------------

namespace {

std::vector<Label> predict_labels(const JointModel& model, const std::vector<EncodedTweet>& data, EnsembleMode mode) {
  std::vector<Label> preds;
  preds.reserve(data.size());
  for (const auto& ex : data) preds.push_back(run_model(model, ex.seq, mode).prediction.label);
  return preds;
}

std::vector<Label> gold_labels(const std::vector<EncodedTweet>& data) {
  std::vector<Label> golds;
  golds.reserve(data.size());
  for (const auto& ex : data) {
    if (!ex.label) throw ValueError("example '" + ex.uid + "' has no gold label");
    golds.push_back(*ex.label);
  }
  return golds;
}

void zero(JointModel& grads) {
  for (auto& [_, t] : parameter_list(grads)) t->fill(0.0);
}

bool finite_model(const JointModel& model) {
  for (const auto& [_, t] : parameter_list(model)) {
    if (!t->all_finite()) return false;
  }
  return true;
}

}  // namespace

double batch_loss(const JointModel& model, const std::vector<EncodedTweet>& batch) {
  if (batch.empty()) throw ValueError("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    if (!ex.label) throw ValueError("batch_loss: unlabeled example '" + ex.uid + "'");
    const ModelOutput o = run_model(model, ex.seq, EnsembleMode::product);
    const std::size_t g = index_of(*ex.label);
    total += cross_entropy(o.cnn.p_cnn, g) + cross_entropy(o.attention.p_att, g);
  }
  return total / static_cast<double>(batch.size());
}

double accuracy(const JointModel& model, const std::vector<EncodedTweet>& data, EnsembleMode mode) {
  if (data.empty()) throw ValueError("accuracy: empty dataset");
  const auto golds = gold_labels(data);
  const auto preds = predict_labels(model, data, mode);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) hits += golds[i] == preds[i];
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

TrainResult train(const std::vector<EncodedTweet>& train_set, const std::vector<EncodedTweet>& val_set,
                  const TrainConfig& config, JointModel initial, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ValueError("train: empty training set");
  if (val_set.empty()) throw ValueError("train: empty validation set");
  const auto train_golds = gold_labels(train_set);
  const auto val_golds = gold_labels(val_set);

  std::mt19937_64 rng(config.seed);
  JointModel model = std::move(initial);
  JointModel grads = zeros_like(model);
  Adam adam(model, config);

  TrainResult result;
  result.model = model;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::size_t batch_len = 1;
      for (std::size_t k = start; k < end; ++k) batch_len = std::max(batch_len, train_set[order[k]].seq.n);

      zero(grads);
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = train_set[order[k]];
        const SubwordSequence seq = trim(ex.seq, batch_len);
        loss += accumulate_gradients(model, seq, train_golds[order[k]], config.dropout_rate, rng, grads, scale).total();
      }
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (examples " + std::to_string(start) + ".." +
                           std::to_string(end - 1) + " of the shuffled order)");
      }
      epoch_loss += loss;
      adam.step(model, grads);
    }
    if (!finite_model(model)) {
      throw NumericError("parameters became non-finite during epoch " + std::to_string(epoch));
    }

    const auto preds = predict_labels(model, val_set, config.ensemble_mode);
    const MetricsReport report = metrics(confusion(val_golds, preds));
    const EpochLog entry{epoch, epoch_loss / static_cast<double>(train_set.size()), report.weighted_f1,
                         report.macro_f1};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (entry.val_weighted_f1 > result.best_score) {
      result.best_score = entry.val_weighted_f1;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,train_loss,val_weighted_f1,val_macro_f1\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_weighted_f1,
                  e.val_macro_f1);
    out << buf;
  }
}

// ---- checkpoints --------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'M', 'S', 'E', 'N', 'T', 'C', 'K'};

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

bool read_u64(std::istream& in, std::uint64_t& v) {
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) return false;
  v = to_little(v);
  return true;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, std::ostream& out) {
  nlohmann::ordered_json header;
  header["format"] = "cmsent-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = nlohmann::ordered_json::parse(ck.config.to_json());
  header["pipeline"] = {{"vocab_path", ck.pipeline.vocab_path},
                        {"translit_rules_path", ck.pipeline.translit_rules_path},
                        {"translit_lang", lang_name(ck.pipeline.translit_lang)}};
  header["vocab_hash"] = ck.vocab_hash;
  header["epoch"] = ck.epoch;
  header["best_score"] = ck.best_score;
  header["shared_embedding"] = ck.model.shared_embedding;
  header["embedding_trainable"] = ck.model.cnn_embedding.trainable;
  const auto params = parameter_list(ck.model);
  header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [name, t] : params) header["tensors"].push_back({{"name", name}, {"shape", t->shape()}});

  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [_, t] : params) {
    for (double v : t->data()) write_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error("failed writing checkpoint");
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  save_checkpoint(checkpoint, out);
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw LoadError("not a checkpoint file (bad magic)");
  }
  std::uint64_t header_len = 0;
  if (!read_u64(in, header_len) || header_len == 0 || header_len > (std::uint64_t{1} << 30)) {
    throw LoadError("corrupted checkpoint header length");
  }
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw LoadError("truncated checkpoint header");

  Checkpoint ck;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("format") != "cmsent-checkpoint") throw LoadError("unknown checkpoint format");
    if (header.at("version") != kCheckpointVersion) {
      throw LoadError("checkpoint version " + header.at("version").dump() + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    ck.config = TrainConfig::from_json(header.at("config").dump());
    const auto& pipe = header.at("pipeline");
    ck.pipeline.vocab_path = pipe.at("vocab_path").get<std::string>();
    ck.pipeline.translit_rules_path = pipe.at("translit_rules_path").get<std::string>();
    const auto lang = parse_lang(pipe.at("translit_lang").get<std::string>());
    if (!lang) throw LoadError("unknown transliteration language in checkpoint");
    ck.pipeline.translit_lang = *lang;
    ck.vocab_hash = header.at("vocab_hash").get<std::string>();
    ck.epoch = header.at("epoch").get<std::size_t>();
    ck.best_score = header.at("best_score").get<double>();
    ck.model.shared_embedding = header.at("shared_embedding").get<bool>();
    const bool trainable = header.at("embedding_trainable").get<bool>();
    ck.model.cnn_embedding.trainable = trainable;
    ck.model.att_embedding.trainable = trainable;
    for (const auto& t : header.at("tensors")) {
      layout.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<std::vector<std::size_t>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupted checkpoint header: ") + e.what());
  } catch (const ValueError& e) {
    throw LoadError(std::string("corrupted checkpoint config: ") + e.what());
  }

  auto params = parameter_list(ck.model);
  if (params.size() != layout.size()) throw LoadError("checkpoint tensor list does not match the model layout");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].first != layout[k].first) {
      throw LoadError("checkpoint tensor '" + layout[k].first + "' where '" + params[k].first + "' was expected");
    }
    Tensor t;
    try {
      t = Tensor(layout[k].second);
    } catch (const DimensionError& e) {
      throw LoadError(std::string("bad tensor shape in checkpoint: ") + e.what());
    }
    for (double& v : t.data()) {
      std::uint64_t bits = 0;
      if (!read_u64(in, bits)) throw LoadError("truncated checkpoint payload in tensor '" + layout[k].first + "'");
      v = std::bit_cast<double>(bits);
    }
    *params[k].second = std::move(t);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after checkpoint payload");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

std::string check_vocab(const Checkpoint& checkpoint, const BpeVocab& vocab, bool force) {
  const std::string actual = vocab.fingerprint();
  if (actual == checkpoint.vocab_hash) return {};
  const std::string msg = "vocabulary fingerprint " + actual + " differs from the checkpoint's " + checkpoint.vocab_hash;
  if (!force) throw VocabMismatch(msg + " (pass --force to override)");
  return "warning: " + msg;
}

}  // namespace cmsent
