// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prunesearch/encoder.hpp"

namespace prunesearch {

inline constexpr std::int32_t kClsToken = 0;
inline constexpr std::int32_t kPadToken = 1;
inline constexpr std::int32_t kFirstContentToken = 2;

enum class TaskKind { classification, regression };

TaskKind parse_task_kind(std::string_view name);
std::string_view to_string(TaskKind kind);

struct Example {
  std::vector<std::int32_t> token_ids;  // unpadded
  int label = 0;       // classification
  float target = 0.f;  // regression
  std::string split = "train";

  friend bool operator==(const Example&, const Example&) = default;
};

struct Dataset {
  TaskKind kind = TaskKind::classification;
  std::size_t vocab_size = 0;
  std::size_t num_classes = 2;  // 1 for regression
  std::vector<Example> examples;

  /// Examples whose split tag equals `tag`.
  Dataset subset(std::string_view tag) const;
  std::size_t size() const { return examples.size(); }
  /// Throws InputError on ids outside the vocab or labels outside the class
  /// range.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Seeded toy task. Position 0 of every sequence is the CLS token.
///
/// Classification: each class owns a slice of the vocabulary; with
/// probability signal_to_noise/2 a position is drawn from the label's slice,
/// otherwise uniformly, so at zero signal the labels are independent of the
/// tokens. Regression: the target is tanh(3 * (share of slice 0 - share of
/// slice 1)) plus Gaussian noise of scale (1 - signal_to_noise)/2.
struct SyntheticTaskSpec {
  TaskKind kind = TaskKind::classification;
  std::size_t vocab_size = 32;
  std::size_t seq_len = 16;
  std::size_t num_examples = 512;
  std::uint64_t seed = 0;
  double signal_to_noise = 1.0;
  std::size_t num_classes = 2;
  /// Trailing fraction of examples tagged "dev"; the rest are "train".
  double dev_fraction = 0.25;

  void validate() const;
};

Dataset generate_synthetic_task(const SyntheticTaskSpec& spec);

void write_dataset(const Dataset& data, const std::filesystem::path& path);
/// Throws FormatError on malformed files or unknown schema versions.
Dataset read_dataset(const std::filesystem::path& path);
std::string dataset_to_text(const Dataset& data);
Dataset dataset_from_text(std::string_view text);

/// Pads the selected examples to the longest one with kPadToken.
Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);
/// Consecutive batches covering the dataset in order.
std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size);

/// Encoder geometry that fits the dataset's vocabulary and label type.
EncoderConfig config_for(const Dataset& data, EncoderConfig base);

}  // namespace prunesearch
