// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prunesearch/dataset.hpp"
#include "prunesearch/encoder.hpp"
#include "prunesearch/finetune.hpp"
#include "prunesearch/metrics.hpp"
#include "prunesearch/pruning.hpp"

namespace prunesearch {

inline constexpr const char* kCodeVersion = "prunesearch 0.1.0";

struct SearchConfig {
  double target_overall = 0.5;
  std::size_t num_candidates = 16;
  std::uint64_t seed = 0;
  /// Unset clamps default to p - 0.25 and p + 0.25, limited to [0, 1].
  std::optional<double> beta_min;
  std::optional<double> beta_max;
  MetricKind metric = MetricKind::accuracy;
  std::string eval_split = "train";
  /// Worker threads for candidate evaluation; 0 picks the hardware count.
  std::size_t num_workers = 0;

  double lower_clamp() const;
  double upper_clamp() const;
  /// ConfigError for n == 0 or out-of-range values; InfeasibleError when the
  /// target cannot be met inside the clamps.
  void validate() const;

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

struct CandidateRecord {
  PruningStrategy strategy;
  double pre_finetune_score = 0.0;
  std::optional<double> post_finetune_score;
  double eval_wall_time_s = 0.0;
};

struct FinetuneRun {
  std::size_t candidate_index = 0;
  bool kd = false;
  TrainLog log;
};

struct SearchReport {
  SearchConfig config;
  std::vector<CandidateRecord> candidates;
  std::size_t best_index = 0;
  std::uint64_t seed = 0;
  std::string code_version = kCodeVersion;
  std::vector<FinetuneRun> finetune_runs;
};

/// Equality on every field except wall-clock timings.
bool same_results(const SearchReport& a, const SearchReport& b);

/// Index of the highest pre-finetune score; ties go to the lowest index.
std::size_t select_best(std::span<const CandidateRecord> candidates);

/// Indices of the k best candidates by pre-finetune score, best first.
std::vector<std::size_t> top_k(std::span<const CandidateRecord> candidates,
                               std::size_t k);

/// Draws n strategies meeting the overall ratio within 1e-4. Candidate j
/// draws from its own stream derived from (seed, j), so the output is
/// bit-identical for identical inputs.
std::vector<PruningStrategy> sample_strategies(
    const SearchConfig& cfg, std::span<const std::size_t> layer_sizes);

/// Scores the pruned sub-network without touching any weight of `model`.
double evaluate_candidate(const ModelCheckpoint& model,
                          const PruningStrategy& strategy, const Dataset& data,
                          MetricKind metric);

/// Evaluates `strategies` in parallel over a shared read-only checkpoint.
std::vector<CandidateRecord> evaluate_candidates(
    const ModelCheckpoint& model, std::span<const PruningStrategy> strategies,
    const Dataset& data, MetricKind metric, std::size_t num_workers);

/// Sample, prune, evaluate and select. `data` is filtered by
/// cfg.eval_split.
SearchReport run_search(const SearchConfig& cfg,
                        const ModelCheckpoint& checkpoint, const Dataset& data);

struct CorrelationResult {
  std::vector<double> pre_scores;
  std::vector<double> post_scores;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
};

/// Fine-tunes every sampled candidate on the "train" split for
/// `finetune_cfg.epochs` epochs and correlates pre- and post-finetune
/// scores, both measured on cfg.eval_split. Throws StatisticsError when
/// fewer than 3 candidates are requested.
CorrelationResult correlation_study(const SearchConfig& cfg,
                                    const ModelCheckpoint& checkpoint,
                                    const Dataset& data,
                                    const FinetuneConfig& finetune_cfg);

/// Correlation coefficients of paired scores; StatisticsError when n < 3.
CorrelationResult correlate_pairs(std::vector<double> pre,
                                  std::vector<double> post);

}  // namespace prunesearch
