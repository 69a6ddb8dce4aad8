#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "cmsent/labels.hpp"
#include "cmsent/tensor.hpp"

namespace cmsent {

enum class EnsembleMode { product, weighted_average };

std::string_view ensemble_mode_name(EnsembleMode mode);
std::optional<EnsembleMode> parse_ensemble_mode(std::string_view name);

inline constexpr double kProbabilityTolerance = 1e-6;

struct Prediction {
  Tensor p_cnn;
  Tensor p_att;
  Tensor raw;      // unnormalized combination
  Tensor p_final;  // raw renormalized to sum to one
  Label label = Label::negative;
  // Set when the winning class was chosen by the negative < neutral < positive
  // order, or when the raw product vanished entirely.
  bool tie = false;
};

/// Element-wise product p_cnn * p_att. Throws ValueError unless both inputs
/// are 3-class probability vectors (nonnegative, sum within 1e-6 of one).
Prediction combine(const Tensor& p_cnn, const Tensor& p_att);

/// weight * p_cnn + (1 - weight) * p_att; kept for comparison runs.
Prediction combine_weighted(const Tensor& p_cnn, const Tensor& p_att, double weight = 0.5);

Prediction combine(const Tensor& p_cnn, const Tensor& p_att, EnsembleMode mode);

/// {uid, p_cnn, p_att, p_final, class, tie_flag} as one JSON object.
std::string prediction_json(std::string_view uid, const Prediction& prediction);

}  // namespace cmsent
