// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prunesearch/mask.hpp"
#include "prunesearch/tensor.hpp"

namespace prunesearch {

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 32;
  std::size_t num_heads = 4;
  std::size_t ffn_size = 64;
  std::size_t max_seq_len = 32;
  std::size_t vocab_size = 64;
  std::size_t num_outputs = 2;

  /// Throws ConfigError unless every count is >= 1 and the hidden size is
  /// divisible by the head count.
  void validate() const;
  std::size_t head_dim() const { return hidden_size / num_heads; }

  /// BERT-base geometry: 12 layers, hidden 768, 12 heads.
  static EncoderConfig bert_base_shape();

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Post-norm encoder block. Linear weights are stored input-major
/// (y = x * W + b), biases and layer-norm parameters as 1xN rows.
template <typename T>
struct BasicLayerWeights {
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<T> ln1_gain, ln1_bias;
  Matrix<T> w1, b1, w2, b2;
  Matrix<T> ln2_gain, ln2_bias;

  friend bool operator==(const BasicLayerWeights&,
                         const BasicLayerWeights&) = default;
};

template <typename T>
struct BasicModel {
  EncoderConfig config;
  Matrix<T> token_embedding;     // vocab x H
  Matrix<T> position_embedding;  // max_seq_len x H
  std::vector<BasicLayerWeights<T>> layers;
  Matrix<T> head_weight;  // H x num_outputs
  Matrix<T> head_bias;    // 1 x num_outputs

  /// Correctly shaped model with every tensor zero.
  static BasicModel zeros(const EncoderConfig& config);

  friend bool operator==(const BasicModel&, const BasicModel&) = default;
};

using LayerWeights = BasicLayerWeights<float>;
using ModelCheckpoint = BasicModel<float>;

template <typename M>
struct NamedTensor {
  std::string name;
  M* tensor;
};

/// Every tensor of the model with its canonical container name, in a fixed
/// order: embeddings, then layers.{i}.*, then the head.
template <typename T>
std::vector<NamedTensor<Matrix<T>>> named_tensors(BasicModel<T>& model);
template <typename T>
std::vector<NamedTensor<const Matrix<T>>> named_tensors(
    const BasicModel<T>& model);

/// Names of the six prunable matrices of encoder layer `layer`
/// (query, key, value, output, ffn up, ffn down).
std::array<std::string, 6> prunable_tensor_names(std::size_t layer);
bool is_prunable_tensor(std::string_view name);
/// Number of prunable weights in one encoder layer: 4*H*H + 2*H*ffn.
std::size_t prunable_layer_size(const EncoderConfig& config);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
/// layer-norm gains. Embeddings are Uniform(-1, 1).
ModelCheckpoint init_model(const EncoderConfig& config, std::uint64_t seed);

/// Throws FormatError naming the offending tensor if any shape disagrees
/// with the config or any value is non-finite.
void validate_model(const ModelCheckpoint& model);

BasicModel<double> widen(const ModelCheckpoint& model);

/// Class indices for classification, real targets for regression.
using Labels = std::variant<std::vector<int>, std::vector<float>>;

struct Batch {
  std::vector<std::vector<std::int32_t>> token_ids;  // padded, equal lengths
  std::vector<std::vector<std::uint8_t>> mask;       // 1 marks a real token
  Labels labels;

  std::size_t size() const { return token_ids.size(); }
  bool is_regression() const {
    return std::holds_alternative<std::vector<float>>(labels);
  }
};

/// Throws InputError on out-of-range ids, ragged or mismatched masks, an
/// example whose first position is padding, or a label count mismatch.
/// Empty label vectors are allowed (inference only).
void validate_batch(const Batch& batch, const EncoderConfig& config);

struct ForwardOutput {
  DenseMatrix logits;  // batch x num_outputs
  /// hidden_states[layer][example] is the seq x H output of that layer.
  std::vector<std::vector<DenseMatrix>> hidden_states;
  /// attention[layer][example][head] is seq x seq; filled only on request.
  std::vector<std::vector<std::vector<DenseMatrix>>> attention;
};

ForwardOutput forward(const ModelCheckpoint& model, const Batch& batch,
                      bool keep_attention = false);

/// Same as forward() on a copy of `model` whose masked weights are zeroed.
/// Throws DimensionError if a mask does not match its tensor, and
/// ConfigError for masks naming unknown tensors.
ForwardOutput masked_forward(const ModelCheckpoint& model,
                             const PruneMask& masks, const Batch& batch);

/// Zeroes the masked weights in place.
void apply_masks(ModelCheckpoint& model, const PruneMask& masks);

enum class LossKind { cross_entropy, mse, kd_composite };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

struct LossSpec {
  LossKind kind = LossKind::cross_entropy;
  /// Weight of the hidden-state distillation term (kd_composite only).
  double kd_weight = 1.0;
  /// Teacher activations on the same batch (kd_composite only).
  const ForwardOutput* teacher = nullptr;
};

struct Gradients {
  ModelCheckpoint tensors;  // same shapes as the model
  double loss = 0.0;
  double task_loss = 0.0;
  double distill_loss = 0.0;  // unweighted layer-averaged hidden-state MSE
};

/// Batch-mean loss and its gradient with respect to every tensor.
///
/// cross_entropy needs class labels, mse needs real targets and a single
/// output; kd_composite adds kd_weight * mean_l MSE(student_l, teacher_l) to
/// whichever task loss the labels imply, where the MSE runs over real tokens.
Gradients backward(const ModelCheckpoint& model, const Batch& batch,
                   const LossSpec& spec);

/// Loss only, evaluated with the float pipeline.
double compute_loss(const ModelCheckpoint& model, const Batch& batch,
                    const LossSpec& spec);

/// Loss re-evaluated entirely in double precision. Used as a low-noise
/// target for finite-difference gradient checks.
double reference_loss(const ModelCheckpoint& model, const Batch& batch,
                      const LossSpec& spec);

/// Inference-only model whose six prunable matrices per layer are CSR.
struct SparseLayerWeights {
  SparseMatrixCSR wq, wk, wv, wo, w1, w2;
  DenseMatrix bq, bk, bv, bo, ln1_gain, ln1_bias, b1, b2, ln2_gain, ln2_bias;
};

struct SparseModel {
  EncoderConfig config;
  DenseMatrix token_embedding;
  DenseMatrix position_embedding;
  std::vector<SparseLayerWeights> layers;
  DenseMatrix head_weight;
  DenseMatrix head_bias;
};

SparseModel to_sparse(const ModelCheckpoint& model);
ForwardOutput forward(const SparseModel& model, const Batch& batch);

/// Predicted class per example (argmax, lowest index on ties).
std::vector<int> argmax_rows(const DenseMatrix& logits);

}  // namespace prunesearch
