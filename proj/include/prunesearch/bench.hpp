// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "prunesearch/encoder.hpp"

namespace prunesearch {

inline constexpr std::size_t kMinBenchReps = 30;
inline constexpr std::size_t kMinBenchWarmup = 5;

struct BenchConfig {
  std::size_t batch_size = 1;
  std::size_t seq_len = 32;
  std::size_t reps = kMinBenchReps;
  std::size_t warmup = kMinBenchWarmup;
  std::uint64_t seed = 0;

  /// ConfigError below the repetition/warmup minimums or for empty batches.
  void validate(const EncoderConfig& model) const;
};

struct BenchResult {
  std::string variant;  // "dense" or "sparse"
  std::size_t batch_size = 0;
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double min_ms = 0.0;
  double p90_ms = 0.0;
  /// Sequences per second at the median latency.
  double throughput = 0.0;
  std::size_t reps = 0;
  std::size_t warmup = 0;
  double sparsity = 0.0;
  /// (p90 - min) / median; the spread that comparisons should allow for.
  double jitter_bound = 0.0;
};

struct LatencySummary {
  double median = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double p90 = 0.0;  // nearest rank
};

/// DomainError on an empty sample.
LatencySummary summarize(std::span<const double> samples_ms);

BenchResult make_bench_result(std::string variant, std::size_t batch_size,
                              std::span<const double> samples_ms,
                              std::size_t warmup, double sparsity);

/// Times dense and CSR inference of `model` on one seeded batch, alternating
/// the two variants per repetition on the calling thread. Conversion to CSR
/// happens before timing starts.
std::pair<BenchResult, BenchResult> bench_encoder(const ModelCheckpoint& model,
                                                  const BenchConfig& cfg);

/// Single-line JSON object per result.
std::string bench_result_json(const BenchResult& r);

}  // namespace prunesearch
