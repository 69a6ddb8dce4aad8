#include "cmsent/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "json.hpp"

#include "cmsent/errors.hpp"

namespace cmsent {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) t += c;
  }
  return t;
}

std::size_t ConfusionMatrix::gold_count(Label gold) const {
  std::size_t t = 0;
  for (std::size_t c : counts[index_of(gold)]) t += c;
  return t;
}

std::string ConfusionMatrix::pretty() const {
  std::ostringstream out;
  out << std::setw(14) << "gold \\ pred";
  for (auto name : kLabelNames) out << std::setw(10) << name;
  out << '\n';
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    out << std::setw(14) << kLabelNames[g];
    for (std::size_t p = 0; p < kNumClasses; ++p) out << std::setw(10) << counts[g][p];
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix confusion(std::span<const Label> golds, std::span<const Label> preds) {
  if (golds.size() != preds.size()) {
    throw ValueError("confusion: " + std::to_string(golds.size()) + " gold labels but " +
                     std::to_string(preds.size()) + " predictions");
  }
  if (golds.empty()) throw ValueError("confusion: no examples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < golds.size(); ++i) ++cm.counts[index_of(golds[i])][index_of(preds[i])];
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.total = cm.total();
  std::size_t correct = 0;
  std::array<double, kNumClasses> f1s{};
  std::array<std::size_t, kNumClasses> supports{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    double predicted = 0.0;
    double gold = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      predicted += static_cast<double>(cm.counts[k][c]);
      gold += static_cast<double>(cm.counts[c][k]);
    }
    ClassMetrics& m = r.per_class[c];
    m.precision = ratio(tp, predicted);
    m.recall = ratio(tp, gold);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.support = cm.counts[c][0] + cm.counts[c][1] + cm.counts[c][2];
    correct += cm.counts[c][c];
    r.macro_precision += m.precision / kNumClasses;
    r.macro_recall += m.recall / kNumClasses;
    r.macro_f1 += m.f1 / kNumClasses;
    f1s[c] = m.f1;
    supports[c] = m.support;
  }
  r.weighted_f1 = weighted_mean(f1s, supports);
  r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(r.total));
  return r;
}

double weighted_mean(std::span<const double> values, std::span<const std::size_t> supports) {
  if (values.size() != supports.size()) throw ValueError("weighted_mean: length mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += static_cast<double>(supports[i]) * values[i];
    den += static_cast<double>(supports[i]);
  }
  return ratio(num, den);
}

std::string metrics_json(const MetricsReport& report, const ConfusionMatrix& cm) {
  nlohmann::ordered_json j;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = report.per_class[c];
    j["per_class"][std::string(kLabelNames[c])] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  j["macro_precision"] = report.macro_precision;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  j["weighted_f1"] = report.weighted_f1;
  j["accuracy"] = report.accuracy;
  j["total"] = report.total;
  j["class_order"] = kLabelNames;
  j["confusion"] = cm.counts;
  return j.dump(2) + "\n";
}

PcaProjection pca_2d(const Tensor& data) {
  if (data.rank() != 2 || data.size() == 0) throw ValueError("pca_2d: empty dataset");
  const auto N = static_cast<Eigen::Index>(data.dim(0));
  const auto d = static_cast<Eigen::Index>(data.dim(1));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(data.data().data(), N, d);

  const Eigen::RowVectorXd mu = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mu;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(N);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_2d: eigendecomposition failed");

  PcaProjection p;
  p.mean = Tensor({static_cast<std::size_t>(d)});
  for (Eigen::Index j = 0; j < d; ++j) p.mean[static_cast<std::size_t>(j)] = mu(j);
  // Eigen returns ascending eigenvalues.
  for (Eigen::Index k = d; k-- > 0;) p.eigenvalues.push_back(solver.eigenvalues()(k));

  p.axes = Tensor({2, static_cast<std::size_t>(d)});
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, d); ++k) {
    Eigen::VectorXd axis = solver.eigenvectors().col(d - 1 - k);
    Eigen::Index pivot = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(axis(j)) > std::abs(axis(pivot))) pivot = j;
    }
    if (axis(pivot) < 0.0) axis = -axis;
    for (Eigen::Index j = 0; j < d; ++j) p.axes.at(static_cast<std::size_t>(k), static_cast<std::size_t>(j)) = axis(j);
  }

  p.coords = Tensor({static_cast<std::size_t>(N), 2});
  for (Eigen::Index i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      double dot = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) dot += centered(i, j) * p.axes.at(k, static_cast<std::size_t>(j));
      p.coords.at(static_cast<std::size_t>(i), k) = dot;
    }
  }
  return p;
}

VectorExport export_vectors(const JointModel& model, const std::vector<EncodedTweet>& dataset, std::ostream& out) {
  if (dataset.empty()) throw ValueError("export_vectors: dataset is empty");
  const std::size_t cnn_dim = model.cnn.fc_W.dim(1);
  const std::size_t att_dim = model.attention.fc_W.dim(1);
  Tensor cnn_vecs({dataset.size(), cnn_dim});
  Tensor att_vecs({dataset.size(), att_dim});
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    // The ensemble mode does not affect the sentence vectors.
    const ModelOutput o = run_model(model, dataset[i].seq, EnsembleMode::product);
    std::copy(o.cnn.pooled.data().begin(), o.cnn.pooled.data().end(), cnn_vecs.row(i).begin());
    std::copy(o.attention.h.data().begin(), o.attention.h.data().end(), att_vecs.row(i).begin());
  }

  VectorExport ex{pca_2d(cnn_vecs), pca_2d(att_vecs)};
  const std::size_t width = std::max(cnn_dim, att_dim);
  out << "uid,label,component";
  for (std::size_t j = 0; j < width; ++j) out << ",dim" << j;
  out << ",pc1,pc2\n";

  auto write_row = [&](std::size_t i, const char* component, const Tensor& vecs, const PcaProjection& proj) {
    const auto& ex_i = dataset[i];
    out << ex_i.uid << ',' << (ex_i.label ? label_name(*ex_i.label) : "") << ',' << component;
    const auto row = vecs.row(i);
    for (std::size_t j = 0; j < width; ++j) {
      out << ',';
      if (j < row.size()) out << number(row[j]);
    }
    out << ',' << number(proj.coords.at(i, 0)) << ',' << number(proj.coords.at(i, 1)) << '\n';
  };
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    write_row(i, "cnn", cnn_vecs, ex.cnn);
    write_row(i, "attention", att_vecs, ex.attention);
  }
  return ex;
}

}  // namespace cmsent
