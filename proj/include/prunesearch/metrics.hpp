// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunesearch {

enum class MetricKind { accuracy, f1, spearman };

MetricKind parse_metric_kind(std::string_view name);
std::string_view to_string(MetricKind kind);
bool is_classification_metric(MetricKind kind);
/// Lower bound of the metric's range: 0 for accuracy and F1, -1 for Spearman.
double metric_lower_bound(MetricKind kind);

/// Fraction of positions where preds == labels.
double metric_accuracy(std::span<const int> preds, std::span<const int> labels);

struct F1Result {
  double value = 0.0;
  /// Set when there were no predicted and no actual positives; value is 0.
  bool undefined = false;
};

/// F1 of the positive class (label 1).
F1Result metric_f1_detailed(std::span<const int> preds,
                            std::span<const int> labels);
double metric_f1(std::span<const int> preds, std::span<const int> labels);

/// 1-based ranks; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Throws StatisticsError when either sample has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks.
double metric_spearman(std::span<const double> preds,
                       std::span<const double> targets);

}  // namespace prunesearch
