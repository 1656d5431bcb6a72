// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prunesearch/errors.hpp"

namespace prunesearch {

PruningStrategy uniform_strategy(std::size_t num_layers, double ratio) {
  PruningStrategy s;
  s.per_layer_ratios.assign(num_layers, ratio);
  s.target_overall = ratio;
  return s;
}

std::size_t pruned_count(double ratio, std::size_t numel) {
  const double k = std::floor(ratio * static_cast<double>(numel) + 1e-9);
  return std::min(numel, static_cast<std::size_t>(std::max(0.0, k)));
}

TensorMask magnitude_prune(const DenseMatrix& w, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw ConfigError("pruning ratio " + std::to_string(ratio) +
                      " outside [0, 1]");
  TensorMask mask = TensorMask::ones(w.rows(), w.cols());
  const std::size_t k = pruned_count(ratio, w.size());
  if (k == 0) return mask;
  const auto values = w.values();
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  // (|w|, index) is a strict total order, so the selection is deterministic.
  auto smaller = [&values](std::uint32_t a, std::uint32_t b) {
    const float ma = std::fabs(values[a]);
    const float mb = std::fabs(values[b]);
    return ma < mb || (ma == mb && a < b);
  };
  if (k < order.size())
    std::nth_element(order.begin(), order.begin() + static_cast<long>(k),
                     order.end(), smaller);
  for (std::size_t i = 0; i < k; ++i) mask.keep[order[i]] = 0;
  return mask;
}

std::vector<std::size_t> layer_sizes(const EncoderConfig& config) {
  return std::vector<std::size_t>(config.num_layers,
                                  prunable_layer_size(config));
}

double overall_ratio(std::span<const double> ratios,
                     std::span<const std::size_t> sizes) {
  if (ratios.size() != sizes.size())
    throw DimensionError("overall_ratio: " + std::to_string(ratios.size()) +
                         " ratios for " + std::to_string(sizes.size()) +
                         " layers");
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    weighted += ratios[i] * static_cast<double>(sizes[i]);
    total += static_cast<double>(sizes[i]);
  }
  if (total == 0.0) throw DomainError("overall_ratio: total layer size is zero");
  return weighted / total;
}

double overall_ratio(const PruningStrategy& s,
                     std::span<const std::size_t> sizes) {
  return overall_ratio(s.per_layer_ratios, sizes);
}

PruneMask strategy_masks(const ModelCheckpoint& m, const PruningStrategy& s) {
  if (s.per_layer_ratios.size() != m.config.num_layers)
    throw ConfigError("strategy has " +
                      std::to_string(s.per_layer_ratios.size()) +
                      " layer ratios, model has " +
                      std::to_string(m.config.num_layers) + " layers");
  PruneMask masks;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    const double r = s.per_layer_ratios[i];
    const auto names = prunable_tensor_names(i);
    const DenseMatrix* mats[6] = {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2};
    for (std::size_t j = 0; j < 6; ++j)
      masks.emplace(names[j], magnitude_prune(*mats[j], r));
  }
  return masks;
}

ModelCheckpoint apply_strategy(const ModelCheckpoint& m,
                               const PruningStrategy& s) {
  ModelCheckpoint out = m;
  apply_masks(out, strategy_masks(m, s));
  return out;
}

PruneMask masks_from_zeros(const ModelCheckpoint& m) {
  PruneMask masks;
  for (const auto& [name, t] : named_tensors(m)) {
    if (!is_prunable_tensor(name)) continue;
    TensorMask mask = TensorMask::ones(t->rows(), t->cols());
    const auto v = t->values();
    for (std::size_t i = 0; i < v.size(); ++i) mask.keep[i] = v[i] != 0.0f;
    masks.emplace(name, std::move(mask));
  }
  return masks;
}

double encoder_sparsity(const ModelCheckpoint& m) {
  std::size_t zeros = 0, total = 0;
  for (const auto& [name, t] : named_tensors(m)) {
    if (!is_prunable_tensor(name)) continue;
    for (float v : t->values()) zeros += (v == 0.0f);
    total += t->size();
  }
  if (total == 0) throw DomainError("model has no prunable weights");
  return static_cast<double>(zeros) / static_cast<double>(total);
}

}  // namespace prunesearch
