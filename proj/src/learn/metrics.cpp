// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/metrics.hpp"

#include <cmath>
#include <string>

#include "lol/errors.hpp"

namespace lol {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": " + std::to_string(a.size()) + " predictions vs " +
                     std::to_string(b.size()) + " targets");
}

}  // namespace

double mean_squared_error(std::span<const double> pred, std::span<const double> target) {
  require_same_length(pred, target, "mean_squared_error");
  if (pred.empty()) throw UndefinedMetricError("mean_squared_error: no items");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double r2_score(std::span<const double> pred, std::span<const double> target) {
  require_same_length(pred, target, "r2_score");
  if (pred.size() < 2) throw UndefinedMetricError("r2_score: needs at least two items");
  double mean = 0.0;
  for (double y : target) mean += y;
  mean /= static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (ss_tot == 0.0) throw UndefinedMetricError("r2_score: targets are constant");
  return 1.0 - ss_res / ss_tot;
}

double kendall_tau(std::span<const double> pred, std::span<const double> target) {
  require_same_length(pred, target, "kendall_tau");
  const std::size_t n = pred.size();
  if (n < 2) throw UndefinedMetricError("kendall_tau: needs at least two items");
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dp = pred[i] - pred[j];
      const double dt = target[i] - target[j];
      const double s = dp * dt;
      if (s > 0.0) ++concordant;
      else if (s < 0.0) ++discordant;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(concordant - discordant) / pairs;
}

double multilabel_accuracy(std::span<const double> logits, std::span<const double> labels) {
  require_same_length(logits, labels, "multilabel_accuracy");
  if (logits.empty()) throw UndefinedMetricError("multilabel_accuracy: no items");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) correct += (logits[i] > 0.0) == (labels[i] == 1.0) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(logits.size());
}

Metrics compute_metrics(const Matrix& predictions, const Matrix& labels, TaskKind kind) {
  if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols())
    throw ShapeError("compute_metrics: predictions and labels differ in shape");
  Metrics m;
  if (kind == TaskKind::multilabel) {
    m.accuracy = multilabel_accuracy(predictions.data(), labels.data());
    std::vector<double> probs(predictions.size());
    for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = 1.0 / (1.0 + std::exp(-predictions.data()[k]));
    m.mse = mean_squared_error(probs, labels.data());
    return m;
  }
  m.mse = mean_squared_error(predictions.data(), labels.data());
  double r2 = 0.0, tau = 0.0;
  for (std::size_t d = 0; d < labels.cols(); ++d) {
    const auto p = predictions.column(d);
    const auto t = labels.column(d);
    r2 += r2_score(p, t);
    tau += kendall_tau(p, t);
  }
  m.r2 = r2 / static_cast<double>(labels.cols());
  m.kendall_tau = tau / static_cast<double>(labels.cols());
  return m;
}

}  // namespace lol
