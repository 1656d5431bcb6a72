// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/finetune.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "prunesearch/errors.hpp"
#include "prunesearch/evaluation.hpp"
#include "prunesearch/rng.hpp"

namespace prunesearch {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct SlotState {
  std::vector<double> m;
  std::vector<double> v;
};

FinetuneResult train_loop(const ModelCheckpoint& start, const PruneMask& masks,
                          const ModelCheckpoint* teacher, const Dataset& train,
                          const FinetuneConfig& cfg, const Dataset* eval) {
  cfg.validate();
  if (train.size() == 0) throw InputError("fine-tuning data is empty");
  check_metric_fits(cfg.metric, train);
  const auto t0 = std::chrono::steady_clock::now();

  FinetuneResult result{start, {}};
  ModelCheckpoint& model = result.model;
  apply_masks(model, masks);

  auto params = named_tensors(model);
  std::vector<const TensorMask*> slot_masks(params.size(), nullptr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = masks.find(params[i].name);
    if (it != masks.end()) slot_masks[i] = &it->second;
  }
  std::vector<SlotState> state(params.size());
  if (cfg.optimizer == OptimizerKind::adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state[i].m.assign(params[i].tensor->size(), 0.0);
      state[i].v.assign(params[i].tensor->size(), 0.0);
    }
  }

  const bool distill = teacher != nullptr && cfg.kd_weight > 0.0;
  const LossKind task_kind = train.kind == TaskKind::classification
                                 ? LossKind::cross_entropy
                                 : LossKind::mse;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start_idx = 0; start_idx < order.size();
         start_idx += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start_idx + cfg.batch_size);
      const Batch batch = make_batch(
          train, std::span<const std::size_t>(order.data() + start_idx,
                                              end - start_idx));
      LossSpec spec{task_kind, 0.0, nullptr};
      ForwardOutput teacher_out;
      if (distill) {
        teacher_out = forward(*teacher, batch);
        spec = {LossKind::kd_composite, cfg.kd_weight, &teacher_out};
      }
      Gradients grads;
      try {
        grads = backward(model, batch, spec);
      } catch (const NumericError& e) {
        throw NumericError("fine-tuning diverged at step " +
                           std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + "): " + e.what());
      }
      if (step == 0) result.log.initial_distill_loss = grads.distill_loss;
      loss_sum += grads.loss;
      ++batches;
      ++step;

      auto gparams = named_tensors(grads.tensors);
      const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].tensor->values();
        auto g = gparams[p].tensor->values();
        const TensorMask* mask = slot_masks[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (mask && !mask->keep[i]) {
            w[i] = 0.0f;
            continue;
          }
          const double gi = g[i];
          double update;
          if (cfg.optimizer == OptimizerKind::adam) {
            double& m = state[p].m[i];
            double& v = state[p].v[i];
            m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * gi;
            v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * gi * gi;
            update = (m / bias1) / (std::sqrt(v / bias2) + kAdamEps);
          } else {
            update = gi;
          }
          w[i] = static_cast<float>(w[i] - cfg.learning_rate * update);
        }
      }
    }
    result.log.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    result.log.epoch_score.push_back(
        evaluate_model(model, eval ? *eval : train, cfg.metric));
  }
  result.log.final_score = result.log.epoch_score.back();
  result.log.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

void FinetuneConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be finite and >= 0");
  if (!(kd_weight >= 0.0) || !std::isfinite(kd_weight))
    throw ConfigError("kd weight must be finite and >= 0");
}

FinetuneConfig FinetuneConfig::bert_base_defaults() {
  FinetuneConfig c;
  c.epochs = 4;
  c.batch_size = 32;
  c.learning_rate = 3e-5;
  return c;
}

FinetuneResult finetune(const ModelCheckpoint& model, const PruneMask& masks,
                        const Dataset& train, const FinetuneConfig& cfg,
                        const Dataset* eval) {
  return train_loop(model, masks, nullptr, train, cfg, eval);
}

FinetuneResult kd_finetune(const ModelCheckpoint& student,
                           const PruneMask& masks,
                           const ModelCheckpoint& teacher,
                           const Dataset& train, const FinetuneConfig& cfg,
                           const Dataset* eval) {
  if (!(teacher.config == student.config))
    throw ConfigError("teacher and student encoder configs differ");
  return train_loop(student, masks, &teacher, train, cfg, eval);
}

}  // namespace prunesearch
