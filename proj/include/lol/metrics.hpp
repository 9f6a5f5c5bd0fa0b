// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <optional>
#include <span>

#include "lol/dataset.hpp"
#include "lol/matrix.hpp"

namespace lol {

double mean_squared_error(std::span<const double> pred, std::span<const double> target);

/// 1 − SS_res/SS_tot. Throws UndefinedMetricError for fewer than two items or
/// constant targets.
double r2_score(std::span<const double> pred, std::span<const double> target);

/// Kendall's tau-a over all pairs: (concordant − discordant) / (n(n−1)/2), with
/// pairs tied in either sequence counted as neither. O(n²). Throws
/// UndefinedMetricError for fewer than two items.
double kendall_tau(std::span<const double> pred, std::span<const double> target);

/// Mean over entries of 1[(logit > 0) == (label == 1)].
double multilabel_accuracy(std::span<const double> logits, std::span<const double> labels);

/// Metrics that do not apply to a task kind are left empty.
struct Metrics {
  std::optional<double> mse;
  std::optional<double> r2;
  std::optional<double> kendall_tau;
  std::optional<double> accuracy;
};

/// Rows are items, columns are label dimensions. Regression: mse over all
/// entries, r2 and tau averaged over label dimensions. Multilabel: accuracy,
/// and mse of sigmoid probabilities against the 0/1 labels.
Metrics compute_metrics(const Matrix& predictions, const Matrix& labels, TaskKind kind);

}  // namespace lol
