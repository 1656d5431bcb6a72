// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prunesearch/errors.hpp"

namespace prunesearch {

namespace {

template <typename A, typename B>
void require_pair(std::span<A> a, std::span<B> b, const char* what) {
  if (a.size() != b.size())
    throw DimensionError(std::string(what) + ": length mismatch " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  if (a.empty()) throw DomainError(std::string(what) + ": empty input");
}

}  // namespace

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "accuracy") return MetricKind::accuracy;
  if (name == "f1") return MetricKind::f1;
  if (name == "spearman") return MetricKind::spearman;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::accuracy:
      return "accuracy";
    case MetricKind::f1:
      return "f1";
    case MetricKind::spearman:
      return "spearman";
  }
  return "unknown";
}

bool is_classification_metric(MetricKind kind) {
  return kind != MetricKind::spearman;
}

double metric_lower_bound(MetricKind kind) {
  return kind == MetricKind::spearman ? -1.0 : 0.0;
}

double metric_accuracy(std::span<const int> preds,
                       std::span<const int> labels) {
  require_pair(preds, labels, "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

F1Result metric_f1_detailed(std::span<const int> preds,
                            std::span<const int> labels) {
  require_pair(preds, labels, "f1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == 1, l = labels[i] == 1;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  if (tp + fp == 0 && tp + fn == 0) return {0.0, true};
  // 2PR/(P+R) simplifies to 2tp/(2tp+fp+fn).
  return {2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn),
          false};
}

double metric_f1(std::span<const int> preds, std::span<const int> labels) {
  return metric_f1_detailed(preds, labels).value;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, "pearson");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw StatisticsError("correlation undefined for a constant sample");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double metric_spearman(std::span<const double> preds,
                       std::span<const double> targets) {
  require_pair(preds, targets, "spearman");
  const auto rp = average_ranks(preds);
  const auto rt = average_ranks(targets);
  return pearson(rp, rt);
}

}  // namespace prunesearch
