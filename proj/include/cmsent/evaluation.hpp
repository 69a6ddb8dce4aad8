#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cmsent/labels.hpp"
#include "cmsent/model.hpp"
#include "cmsent/tensor.hpp"

namespace cmsent {

// ---- classification metrics ---------------------------------------------

/// Rows are gold classes, columns predictions, both in label order.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const;
  std::size_t gold_count(Label gold) const;
  /// Fixed-width 3x3 table with row and column headers.
  std::string pretty() const;
};

ConfusionMatrix confusion(std::span<const Label> golds, std::span<const Label> preds);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total = 0;
};

/// Every 0/0 ratio is taken as 0.
MetricsReport metrics(const ConfusionMatrix& cm);

/// sum(support_c * f1_c) / sum(support_c).
double weighted_mean(std::span<const double> values, std::span<const std::size_t> supports);

std::string metrics_json(const MetricsReport& report, const ConfusionMatrix& cm);

// ---- sentence-vector projection -----------------------------------------

struct PcaProjection {
  Tensor mean;                       // [d]
  std::vector<double> eigenvalues;   // all d, descending (population covariance)
  Tensor axes;                       // [2 x d]; rows past the data dimension are zero
  Tensor coords;                     // [N x 2]
};

/// Principal axes of the rows of `data` ([N x d]). Each axis is oriented so
/// that its largest-magnitude loading is positive (first such index on ties).
PcaProjection pca_2d(const Tensor& data);

struct VectorExport {
  PcaProjection cnn;
  PcaProjection attention;
};

/// Writes `uid,label,component,dim0..dimN,pc1,pc2`, one row per example and
/// component (cnn, then attention). The shorter component leaves its
/// trailing dim cells empty. Throws ValueError for an empty dataset.
VectorExport export_vectors(const JointModel& model, const std::vector<EncodedTweet>& dataset, std::ostream& out);

}  // namespace cmsent
