#include "cmsent/ensemble.hpp"

#include <cmath>

#include "json.hpp"

#include "cmsent/errors.hpp"

namespace cmsent {

namespace {

void require_probabilities(const Tensor& p, const char* name) {
  if (p.rank() != 1 || p.size() != kNumClasses) {
    throw DimensionError(std::string(name) + " must have " + std::to_string(kNumClasses) + " entries, got shape " +
                         shape_string(p.shape()));
  }
  double total = 0.0;
  for (double v : p.data()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValueError(std::string(name) + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw ValueError(std::string(name) + " sums to " + std::to_string(total) + ", not a probability vector");
  }
}

Prediction finish(Tensor p_cnn, Tensor p_att, Tensor raw) {
  Prediction out;
  out.p_cnn = std::move(p_cnn);
  out.p_att = std::move(p_att);
  out.raw = std::move(raw);

  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (out.raw[c] > out.raw[best]) best = c;
  }
  std::size_t at_max = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (out.raw[c] == out.raw[best]) ++at_max;
  }
  out.label = label_at(best);
  out.tie = at_max > 1;

  double total = 0.0;
  for (double v : out.raw.data()) total += v;
  out.p_final = Tensor({kNumClasses});
  if (total > 0.0) {
    for (std::size_t c = 0; c < kNumClasses; ++c) out.p_final[c] = out.raw[c] / total;
  } else {
    out.p_final.fill(1.0 / kNumClasses);
    out.tie = true;
  }
  return out;
}

}  // namespace

std::string_view ensemble_mode_name(EnsembleMode mode) {
  return mode == EnsembleMode::product ? "product" : "weighted_average";
}

std::optional<EnsembleMode> parse_ensemble_mode(std::string_view name) {
  if (name == "product") return EnsembleMode::product;
  if (name == "weighted_average") return EnsembleMode::weighted_average;
  return std::nullopt;
}

Prediction combine(const Tensor& p_cnn, const Tensor& p_att) {
  require_probabilities(p_cnn, "p_cnn");
  require_probabilities(p_att, "p_att");
  Tensor raw({kNumClasses});
  for (std::size_t c = 0; c < kNumClasses; ++c) raw[c] = p_cnn[c] * p_att[c];
  return finish(p_cnn, p_att, std::move(raw));
}

Prediction combine_weighted(const Tensor& p_cnn, const Tensor& p_att, double weight) {
  require_probabilities(p_cnn, "p_cnn");
  require_probabilities(p_att, "p_att");
  if (!(weight >= 0.0 && weight <= 1.0)) throw ValueError("ensemble weight must lie in [0, 1]");
  Tensor raw({kNumClasses});
  for (std::size_t c = 0; c < kNumClasses; ++c) raw[c] = weight * p_cnn[c] + (1.0 - weight) * p_att[c];
  return finish(p_cnn, p_att, std::move(raw));
}

Prediction combine(const Tensor& p_cnn, const Tensor& p_att, EnsembleMode mode) {
  return mode == EnsembleMode::product ? combine(p_cnn, p_att) : combine_weighted(p_cnn, p_att);
}

std::string prediction_json(std::string_view uid, const Prediction& prediction) {
  nlohmann::ordered_json j;
  j["uid"] = uid;
  j["p_cnn"] = prediction.p_cnn.storage();
  j["p_att"] = prediction.p_att.storage();
  j["p_final"] = prediction.p_final.storage();
  j["class"] = label_name(prediction.label);
  j["tie_flag"] = prediction.tie;
  return j.dump();
}

}  // namespace cmsent
