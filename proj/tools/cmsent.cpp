// Command-line front end: train-bpe, train, eval, predict, export-vectors.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cmsent/errors.hpp"
#include "cmsent/evaluation.hpp"
#include "cmsent/training.hpp"

namespace fs = std::filesystem;
using namespace cmsent;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Input data that cannot be used as given (empty, unlabeled, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Writes `bytes` next to `path` and renames into place, so a failure never
/// leaves a partial file behind.
void write_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("failed writing " + path.string());
    }
  }
  fs::rename(tmp, path);
}

struct Preprocessing {
  std::string rules_path;
  std::string lang = "lang2";

  void add_to(CLI::App& cmd) {
    cmd.add_option("--translit-rules", rules_path, "Transliteration rules TSV (romanized<TAB>native)")
        ->check(CLI::ExistingFile);
    cmd.add_option("--translit-lang", lang, "Language tag whose tokens are transliterated")
        ->check(CLI::IsMember({"lang1", "lang2"}));
  }

  PipelineInfo info(const std::string& vocab_path) const {
    return PipelineInfo{vocab_path, rules_path.empty() ? "" : fs::absolute(rules_path).string(), *parse_lang(lang)};
  }
};

std::vector<CleanTweet> load_clean(const fs::path& path, const PipelineInfo& pipe) {
  std::vector<RawTweet> raw;
  try {
    raw = parse_corpus(path);
  } catch (const ValueError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (raw.empty()) throw DataError(path.string() + " contains no tweets");
  std::optional<TransliterationRules> rules;
  if (!pipe.translit_rules_path.empty()) rules = TransliterationRules::load(fs::path(pipe.translit_rules_path));
  std::vector<CleanTweet> out;
  out.reserve(raw.size());
  for (const auto& t : raw) out.push_back(preprocess(t, rules ? &*rules : nullptr, pipe.translit_lang));
  return out;
}

void require_labels(const std::vector<EncodedTweet>& data, const std::string& what, const std::string& hint) {
  for (const auto& ex : data) {
    if (!ex.label) throw DataError(what + ": tweet '" + ex.uid + "' has no gold label" + hint);
  }
}

// ---- train-bpe ------------------------------------------------------------

struct TrainBpeArgs {
  std::string corpus, out;
  std::size_t vocab_size = kDefaultVocabSize;
  Preprocessing pre;
};

int cmd_train_bpe(const TrainBpeArgs& a) {
  const auto clean = load_clean(a.corpus, a.pre.info(""));
  const BpeVocab vocab = BpeVocab::train(clean, a.vocab_size);
  write_atomic(a.out, vocab.to_json());
  std::cout << "vocab size " << vocab.size() << ", merges " << vocab.merges().size() << "\n";
  return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string train, val, vocab, config, out_checkpoint, log, embeddings;
  bool freeze_embeddings = false;
  Preprocessing pre;
  TrainConfig overrides;
  std::string ensemble_mode;
  const CLI::Option* seed = nullptr;
  const CLI::Option* epochs = nullptr;
  const CLI::Option* batch_size = nullptr;
  const CLI::Option* learning_rate = nullptr;
  const CLI::Option* dropout = nullptr;
  const CLI::Option* max_len = nullptr;
  const CLI::Option* embedding_dim = nullptr;
  const CLI::Option* hidden_size = nullptr;
  const CLI::Option* filters = nullptr;
  const CLI::Option* share = nullptr;
  const CLI::Option* mode = nullptr;
  const CLI::Option* patience = nullptr;
};

/// Config file values first, then every flag given on the command line.
TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig c = a.config.empty() ? TrainConfig{} : TrainConfig::from_json_file(a.config);
  const TrainConfig& o = a.overrides;
  if (a.seed->count()) c.seed = o.seed;
  if (a.epochs->count()) c.epochs = o.epochs;
  if (a.batch_size->count()) c.batch_size = o.batch_size;
  if (a.learning_rate->count()) c.learning_rate = o.learning_rate;
  if (a.dropout->count()) c.dropout_rate = o.dropout_rate;
  if (a.max_len->count()) c.max_len = o.max_len;
  if (a.embedding_dim->count()) c.embedding_dim = o.embedding_dim;
  if (a.hidden_size->count()) c.hidden_size = o.hidden_size;
  if (a.filters->count()) c.filter_count = o.filter_count;
  if (a.share->count()) c.share_embedding = o.share_embedding;
  if (a.mode->count()) c.ensemble_mode = *parse_ensemble_mode(a.ensemble_mode);
  if (a.patience->count()) c.early_stop_patience = o.early_stop_patience;
  c.validate();
  return c;
}

int cmd_train(const TrainArgs& a) {
  const TrainConfig config = resolve_config(a);
  std::cerr << "config " << config.to_json() << "\n";

  const BpeVocab vocab = BpeVocab::load(a.vocab);
  const PipelineInfo pipe = a.pre.info(fs::absolute(a.vocab).string());
  const auto train_set = encode_corpus(load_clean(a.train, pipe), vocab, config.max_len);
  const auto val_set = a.val.empty() ? train_set : encode_corpus(load_clean(a.val, pipe), vocab, config.max_len);
  require_labels(train_set, "training data", "");
  require_labels(val_set, "validation data", "");

  std::optional<EmbeddingTable> table;
  if (!a.embeddings.empty()) {
    auto ext = load_external(fs::path(a.embeddings), vocab, config.embedding_dim, config.seed, !a.freeze_embeddings);
    for (const auto& w : ext.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "external embeddings: " << ext.rows_set << " rows set\n";
    table = std::move(ext.table);
  }

  const auto result = train(train_set, val_set, config, init_model(config, vocab.size(), std::move(table)),
                            [](const EpochLog& e) {
                              std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << " val_weighted_f1 "
                                        << e.val_weighted_f1 << "\n";
                            });

  Checkpoint ck;
  ck.config = config;
  ck.pipeline = pipe;
  ck.vocab_hash = vocab.fingerprint();
  ck.epoch = result.best_epoch;
  ck.best_score = result.best_score;
  ck.model = result.model;

  std::ostringstream ck_bytes(std::ios::binary);
  save_checkpoint(ck, ck_bytes);
  std::ostringstream log;
  write_log_csv(log, result.log);
  const std::string log_path = a.log.empty() ? a.out_checkpoint + ".log.csv" : a.log;
  write_atomic(a.out_checkpoint, ck_bytes.str());
  write_atomic(log_path, log.str());

  std::cout << "best epoch " << result.best_epoch << " of " << result.log.size() << ", val weighted F1 "
            << result.best_score << "\n";
  std::cout << "final train accuracy " << accuracy(result.model, train_set, config.ensemble_mode) << "\n";
  return kOk;
}

// ---- commands that load a checkpoint ---------------------------------------

struct ModelArgs {
  std::string data, checkpoint, out, vocab;
  bool force = false;

  void add_to(CLI::App& cmd, const std::string& out_flag, const std::string& out_help) {
    cmd.add_option("--data", data, "Corpus file (meta line, token<TAB>tag lines, blank line)")->required();
    cmd.add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
    cmd.add_option(out_flag, out, out_help)->required();
    cmd.add_option("--vocab", vocab, "Vocabulary file; defaults to the one recorded in the checkpoint");
    cmd.add_flag("--force", force, "Use the vocabulary even if its fingerprint differs from the checkpoint's");
  }
};

struct Loaded {
  Checkpoint ck;
  std::vector<EncodedTweet> data;
};

Loaded load_for_inference(const ModelArgs& a) {
  Loaded l{load_checkpoint(fs::path(a.checkpoint)), {}};
  const std::string vocab_path = a.vocab.empty() ? l.ck.pipeline.vocab_path : a.vocab;
  const BpeVocab vocab = BpeVocab::load(vocab_path);
  const std::string warning = check_vocab(l.ck, vocab, a.force);
  if (!warning.empty()) std::cerr << warning << "\n";
  if (vocab.size() > l.ck.model.cnn_embedding.vocab_size()) {
    throw LoadError("vocabulary has " + std::to_string(vocab.size()) + " tokens but the checkpoint's embedding has " +
                    std::to_string(l.ck.model.cnn_embedding.vocab_size()) + " rows");
  }
  l.data = encode_corpus(load_clean(a.data, l.ck.pipeline), vocab, l.ck.config.max_len);
  return l;
}

int cmd_eval(const ModelArgs& a) {
  const Loaded l = load_for_inference(a);
  require_labels(l.data, "eval", " (use predict for unlabeled data)");
  std::vector<Label> golds, preds;
  for (const auto& ex : l.data) {
    golds.push_back(*ex.label);
    preds.push_back(run_model(l.ck.model, ex.seq, l.ck.config.ensemble_mode).prediction.label);
  }
  const ConfusionMatrix cm = confusion(golds, preds);
  const MetricsReport report = metrics(cm);
  write_atomic(a.out, metrics_json(report, cm));
  std::cout << cm.pretty() << "accuracy " << report.accuracy << ", weighted F1 " << report.weighted_f1
            << ", macro F1 " << report.macro_f1 << "\n";
  return kOk;
}

nlohmann::ordered_json to_json(const Tensor& t) { return nlohmann::ordered_json(t.data()); }

int cmd_predict(const ModelArgs& a) {
  const Loaded l = load_for_inference(a);
  std::string lines;
  for (const auto& ex : l.data) {
    const ModelOutput o = run_model(l.ck.model, ex.seq, l.ck.config.ensemble_mode);
    nlohmann::ordered_json j;
    j["uid"] = ex.uid;
    j["p_cnn"] = to_json(o.prediction.p_cnn);
    j["p_att"] = to_json(o.prediction.p_att);
    j["p_final"] = to_json(o.prediction.p_final);
    j["class"] = label_name(o.prediction.label);
    j["tie"] = o.prediction.tie;
    j["a"] = to_json(o.attention.a);
    lines += j.dump() + "\n";
  }
  write_atomic(a.out, lines);
  std::cout << l.data.size() << " predictions written to " << a.out << "\n";
  return kOk;
}

int cmd_export_vectors(const ModelArgs& a) {
  const Loaded l = load_for_inference(a);
  std::ostringstream csv;
  const VectorExport e = export_vectors(l.ck.model, l.data, csv);
  write_atomic(a.out, csv.str());
  auto top2 = [](const PcaProjection& p) {
    std::ostringstream s;
    s << p.eigenvalues[0] << " " << (p.eigenvalues.size() > 1 ? p.eigenvalues[1] : 0.0);
    return s.str();
  };
  std::cout << "cnn eigenvalues " << top2(e.cnn) << ", attention eigenvalues " << top2(e.attention) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble CNN + self-attention sentiment classifier for code-mixed tweets"};
  app.require_subcommand(1);

  TrainBpeArgs bpe;
  auto* c_bpe = app.add_subcommand("train-bpe", "Learn a BPE subword vocabulary from a corpus");
  c_bpe->add_option("--corpus", bpe.corpus, "Corpus file")->required();
  c_bpe->add_option("--vocab-size", bpe.vocab_size, "Vocabulary size including reserved tokens")
      ->capture_default_str();
  c_bpe->add_option("--out", bpe.out, "Output vocabulary JSON")->required();
  bpe.pre.add_to(*c_bpe);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the joint model and write a checkpoint and log CSV");
  c_train->add_option("--train", tr.train, "Labeled training corpus")->required();
  c_train->add_option("--val", tr.val, "Labeled validation corpus (defaults to the training corpus)");
  c_train->add_option("--vocab", tr.vocab, "Vocabulary JSON from train-bpe")->required();
  c_train->add_option("--config", tr.config, "JSON config with flat keys; flags override it");
  c_train->add_option("--out-checkpoint", tr.out_checkpoint, "Checkpoint output path")->required();
  c_train->add_option("--log", tr.log, "Per-epoch CSV (default: <checkpoint>.log.csv)");
  c_train->add_option("--embeddings", tr.embeddings, "Pretrained vectors, token<TAB>v1 ... vD per line");
  c_train->add_flag("--freeze-embeddings", tr.freeze_embeddings, "Keep the pretrained table fixed");
  tr.pre.add_to(*c_train);
  TrainConfig& o = tr.overrides;
  tr.seed = c_train->add_option("--seed", o.seed, "Seed for initialization, shuffling and dropout");
  tr.epochs = c_train->add_option("--epochs", o.epochs, "Maximum number of epochs");
  tr.batch_size = c_train->add_option("--batch-size", o.batch_size, "Mini-batch size");
  tr.learning_rate = c_train->add_option("--learning-rate", o.learning_rate, "Adam step size");
  tr.dropout = c_train->add_option("--dropout", o.dropout_rate, "Dropout rate on both sentence vectors");
  tr.max_len = c_train->add_option("--max-len", o.max_len, "Maximum subword sequence length");
  tr.embedding_dim = c_train->add_option("--embedding-dim", o.embedding_dim, "Embedding width D");
  tr.hidden_size = c_train->add_option("--hidden-size", o.hidden_size, "LSTM hidden size H per direction");
  tr.filters = c_train->add_option("--filters", o.filter_count, "CNN filters F per width");
  tr.share = c_train->add_flag("--share-embedding", o.share_embedding, "Both components read one embedding table");
  tr.mode = c_train->add_option("--ensemble-mode", tr.ensemble_mode, "product or weighted_average")
                ->check(CLI::IsMember({"product", "weighted_average"}));
  tr.patience = c_train->add_option("--patience", o.early_stop_patience, "Early-stopping patience in epochs");

  ModelArgs ev, pr, ex;
  auto* c_eval = app.add_subcommand("eval", "Score labeled data; writes a metrics JSON and prints the confusion matrix");
  ev.add_to(*c_eval, "--out-report", "Metrics JSON output");
  auto* c_predict = app.add_subcommand("predict", "Write one JSON line of probabilities and attention per tweet");
  pr.add_to(*c_predict, "--out", "JSON-lines output");
  auto* c_export = app.add_subcommand("export-vectors", "Write sentence vectors and their 2-D PCA projections as CSV");
  ex.add_to(*c_export, "--out", "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_bpe) return cmd_train_bpe(bpe);
    if (*c_train) return cmd_train(tr);
    if (*c_eval) return cmd_eval(ev);
    if (*c_predict) return cmd_predict(pr);
    if (*c_export) return cmd_export_vectors(ex);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ValueError& e) {
    std::cerr << "invalid value: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
