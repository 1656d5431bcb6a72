// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "prunesearch/dataset.hpp"
#include "prunesearch/encoder.hpp"
#include "prunesearch/metrics.hpp"

namespace prunesearch {

inline constexpr std::size_t kDefaultEvalBatch = 64;

/// Throws ConfigError when the metric does not fit the dataset's label type.
void check_metric_fits(MetricKind metric, const Dataset& data);

/// Scores the model on every example of `data` by forward inference only.
/// Classification metrics use argmax predictions; Spearman uses output 0.
/// A constant prediction vector scores 0 under Spearman.
double evaluate_model(const ModelCheckpoint& model, const Dataset& data,
                      MetricKind metric,
                      std::size_t batch_size = kDefaultEvalBatch);

}  // namespace prunesearch
