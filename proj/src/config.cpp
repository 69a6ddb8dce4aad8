#include "cmsent/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cmsent/errors.hpp"

namespace cmsent {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValueError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValueError(std::string(name) + " must be positive");
  };
  positive(epochs, "epochs");
  positive(batch_size, "batch_size");
  positive(max_len, "max_len");
  positive(vocab_size, "vocab_size");
  positive(embedding_dim, "embedding_dim");
  positive(hidden_size, "hidden_size");
  positive(filter_count, "filter_count");
  positive(early_stop_patience, "early_stop_patience");
  // A zero rate is accepted; it freezes every parameter.
  if (!(learning_rate >= 0.0)) throw ValueError("learning_rate must not be negative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValueError("dropout_rate must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValueError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValueError("adam_eps must be positive");
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["dropout_rate"] = dropout_rate;
  j["max_len"] = max_len;
  j["vocab_size"] = vocab_size;
  j["embedding_dim"] = embedding_dim;
  j["hidden_size"] = hidden_size;
  j["filter_count"] = filter_count;
  j["share_embedding"] = share_embedding;
  j["ensemble_mode"] = ensemble_mode_name(ensemble_mode);
  j["early_stop_patience"] = early_stop_patience;
  return j.dump();
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValueError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValueError("config must be a JSON object");

  TrainConfig cfg;
  const json defaults = json::parse(cfg.to_json());
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw ValueError("unknown config key '" + key + "'");
  }
  read_field(j, "seed", cfg.seed);
  read_field(j, "epochs", cfg.epochs);
  read_field(j, "batch_size", cfg.batch_size);
  read_field(j, "learning_rate", cfg.learning_rate);
  read_field(j, "beta1", cfg.beta1);
  read_field(j, "beta2", cfg.beta2);
  read_field(j, "adam_eps", cfg.adam_eps);
  read_field(j, "dropout_rate", cfg.dropout_rate);
  read_field(j, "max_len", cfg.max_len);
  read_field(j, "vocab_size", cfg.vocab_size);
  read_field(j, "embedding_dim", cfg.embedding_dim);
  read_field(j, "hidden_size", cfg.hidden_size);
  read_field(j, "filter_count", cfg.filter_count);
  read_field(j, "share_embedding", cfg.share_embedding);
  read_field(j, "early_stop_patience", cfg.early_stop_patience);
  if (j.contains("ensemble_mode")) {
    std::string mode;
    read_field(j, "ensemble_mode", mode);
    const auto parsed = parse_ensemble_mode(mode);
    if (!parsed) throw ValueError("ensemble_mode must be 'product' or 'weighted_average'");
    cfg.ensemble_mode = *parsed;
  }
  return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace cmsent
