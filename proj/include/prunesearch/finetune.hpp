// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "prunesearch/dataset.hpp"
#include "prunesearch/encoder.hpp"
#include "prunesearch/mask.hpp"
#include "prunesearch/metrics.hpp"

namespace prunesearch {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct FinetuneConfig {
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  /// Zero is accepted and leaves the model unchanged.
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool kd_enabled = false;
  double kd_weight = 1.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  MetricKind metric = MetricKind::accuracy;

  void validate() const;
  /// 4 epochs, batch 32, learning rate 3e-5.
  static FinetuneConfig bert_base_defaults();
};

struct TrainLog {
  std::vector<double> epoch_loss;   // mean batch loss per epoch
  std::vector<double> epoch_score;  // metric on the eval data after each epoch
  double final_score = 0.0;
  double wall_time_s = 0.0;
  /// Unweighted distillation term on the first batch, before any update.
  double initial_distill_loss = 0.0;

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

struct FinetuneResult {
  ModelCheckpoint model;
  TrainLog log;
};

/// Gradient-descent fine-tuning under a fixed mask. Masked gradients are
/// zeroed before the optimizer sees them and masked weights are re-zeroed
/// after every update. Epoch scores use `eval` when given, else `train`.
/// Throws NumericError naming the step if the loss stops being finite.
FinetuneResult finetune(const ModelCheckpoint& model, const PruneMask& masks,
                        const Dataset& train, const FinetuneConfig& cfg,
                        const Dataset* eval = nullptr);

/// As finetune(), adding kd_weight times the layer-averaged hidden-state MSE
/// against the dense `teacher`. With kd_weight == 0 the trajectory is the
/// plain fine-tuning trajectory.
FinetuneResult kd_finetune(const ModelCheckpoint& student,
                           const PruneMask& masks,
                           const ModelCheckpoint& teacher,
                           const Dataset& train, const FinetuneConfig& cfg,
                           const Dataset* eval = nullptr);

}  // namespace prunesearch
