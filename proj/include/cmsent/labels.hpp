#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace cmsent {

inline constexpr std::size_t kNumClasses = 3;

// Class order is fixed everywhere: rows of confusion matrices, logits,
// probability vectors and tie-breaking all follow it.
enum class Label : std::size_t { negative = 0, neutral = 1, positive = 2 };

inline constexpr std::array<std::string_view, kNumClasses> kLabelNames = {"negative", "neutral", "positive"};

inline std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }
inline Label label_at(std::size_t index) { return static_cast<Label>(index); }
inline std::string_view label_name(Label label) { return kLabelNames[index_of(label)]; }

inline std::optional<Label> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kLabelNames[i] == name) return label_at(i);
  }
  return std::nullopt;
}

}  // namespace cmsent
