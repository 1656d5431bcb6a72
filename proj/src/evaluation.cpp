// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/evaluation.hpp"

#include "prunesearch/errors.hpp"

namespace prunesearch {

void check_metric_fits(MetricKind metric, const Dataset& data) {
  const bool classify = data.kind == TaskKind::classification;
  if (classify != is_classification_metric(metric))
    throw ConfigError("metric " + std::string(to_string(metric)) +
                      " does not fit a " + std::string(to_string(data.kind)) +
                      " dataset");
}

double evaluate_model(const ModelCheckpoint& model, const Dataset& data,
                      MetricKind metric, std::size_t batch_size) {
  if (data.size() == 0) throw InputError("evaluation data is empty");
  check_metric_fits(metric, data);
  std::vector<int> preds, labels;
  std::vector<double> outputs, targets;
  for (const Batch& batch : make_batches(data, batch_size)) {
    const ForwardOutput out = forward(model, batch);
    if (data.kind == TaskKind::classification) {
      const auto p = argmax_rows(out.logits);
      preds.insert(preds.end(), p.begin(), p.end());
      const auto& l = std::get<std::vector<int>>(batch.labels);
      labels.insert(labels.end(), l.begin(), l.end());
    } else {
      for (std::size_t r = 0; r < out.logits.rows(); ++r)
        outputs.push_back(out.logits(r, 0));
      const auto& t = std::get<std::vector<float>>(batch.labels);
      targets.insert(targets.end(), t.begin(), t.end());
    }
  }
  switch (metric) {
    case MetricKind::accuracy:
      return metric_accuracy(preds, labels);
    case MetricKind::f1:
      return metric_f1(preds, labels);
    case MetricKind::spearman:
      try {
        return metric_spearman(outputs, targets);
      } catch (const StatisticsError&) {
        return 0.0;
      }
  }
  return 0.0;
}

}  // namespace prunesearch
