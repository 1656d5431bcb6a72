// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prunesearch/encoder.hpp"
#include "prunesearch/mask.hpp"
#include "prunesearch/tensor.hpp"

namespace prunesearch {

/// Per-layer pruning ratios whose size-weighted mean is the overall target.
struct PruningStrategy {
  std::vector<double> per_layer_ratios;
  double target_overall = 0.0;
  std::uint64_t strategy_id = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const PruningStrategy&,
                         const PruningStrategy&) = default;
};

/// A strategy with every layer at `ratio`.
PruningStrategy uniform_strategy(std::size_t num_layers, double ratio);

/// Number of weights removed at `ratio` out of `numel`: floor(ratio * numel),
/// with a 1e-9 guard so ratios like 0.57 are not undercounted by rounding.
std::size_t pruned_count(double ratio, std::size_t numel);

/// Masks the floor(ratio * numel) entries of smallest magnitude. Ties go to
/// the lowest flat index first. Throws ConfigError if ratio is outside [0,1].
TensorMask magnitude_prune(const DenseMatrix& w, double ratio);

/// Prunable element count per encoder layer, in layer order.
std::vector<std::size_t> layer_sizes(const EncoderConfig& config);

/// sum(ratio_i * size_i) / sum(size_i). Throws DimensionError on length
/// mismatch and DomainError when the sizes sum to zero.
double overall_ratio(std::span<const double> ratios,
                     std::span<const std::size_t> sizes);
double overall_ratio(const PruningStrategy& s,
                     std::span<const std::size_t> sizes);

/// Masks for every prunable matrix of the model under `s`. Each of the six
/// matrices in layer i is pruned independently at ratio i.
PruneMask strategy_masks(const ModelCheckpoint& m, const PruningStrategy& s);

/// Copy of `m` with the strategy's masks applied. Embeddings, biases,
/// layer norms and the head are untouched.
ModelCheckpoint apply_strategy(const ModelCheckpoint& m,
                               const PruningStrategy& s);

/// Mask that keeps exactly the nonzero weights of every prunable matrix.
PruneMask masks_from_zeros(const ModelCheckpoint& m);

/// Fraction of zero weights across all prunable encoder matrices.
double encoder_sparsity(const ModelCheckpoint& m);

}  // namespace prunesearch
