// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "prunesearch/checkpoint_io.hpp"
#include "prunesearch/errors.hpp"
#include "prunesearch/evaluation.hpp"
#include "prunesearch/search.hpp"
#include "test_util.hpp"

namespace prunesearch {
namespace {

const std::vector<std::size_t> kUneven{1000, 300, 4000, 50, 700, 2500};

SearchConfig config(double p, std::size_t n, std::uint64_t seed = 1) {
  SearchConfig c;
  c.target_overall = p;
  c.num_candidates = n;
  c.seed = seed;
  return c;
}

TEST(Sampling, MeetsTargetWithinClamps) {
  for (double p : {0.1, 0.5, 0.6, 0.7, 0.9, 0.97}) {
    const SearchConfig c = config(p, 200, 42);
    for (const auto& sizes : {kUneven, std::vector<std::size_t>(12, 64)}) {
      const auto strategies = sample_strategies(c, sizes);
      ASSERT_EQ(strategies.size(), 200u);
      for (const auto& s : strategies) {
        ASSERT_EQ(s.per_layer_ratios.size(), sizes.size());
        EXPECT_LE(std::fabs(overall_ratio(s, sizes) - p), 1e-4);
        for (double b : s.per_layer_ratios) {
          EXPECT_GE(b, c.lower_clamp() - 1e-12);
          EXPECT_LE(b, c.upper_clamp() + 1e-12);
        }
      }
    }
  }
}

TEST(Sampling, StrategiesActuallyVary) {
  const auto s = sample_strategies(config(0.5, 10), kUneven);
  double spread = 0;
  for (double b : s[0].per_layer_ratios) spread = std::max(spread, std::fabs(b - 0.5));
  EXPECT_GT(spread, 0.05);
  EXPECT_NE(s[0].per_layer_ratios, s[1].per_layer_ratios);
}

TEST(Sampling, BoundaryTargets) {
  for (const auto& s : sample_strategies(config(0.0, 5), kUneven))
    for (double b : s.per_layer_ratios) EXPECT_EQ(b, 0.0);
  SearchConfig full = config(1.0, 5);
  full.beta_max = 1.0;
  for (const auto& s : sample_strategies(full, kUneven))
    for (double b : s.per_layer_ratios) EXPECT_EQ(b, 1.0);
}

TEST(Sampling, DeterministicPerCandidateStreams) {
  const auto a = sample_strategies(config(0.6, 10, 9), kUneven);
  EXPECT_EQ(a, sample_strategies(config(0.6, 10, 9), kUneven));
  // Candidate j depends only on (seed, j), not on how many are drawn.
  const auto prefix = sample_strategies(config(0.6, 4, 9), kUneven);
  EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), a.begin()));
  EXPECT_NE(a, sample_strategies(config(0.6, 10, 10), kUneven));
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j].strategy_id, j);
}

TEST(Sampling, InvalidConfigs) {
  SearchConfig c = config(0.5, 3);
  c.beta_min = 0.6;
  EXPECT_THROW(sample_strategies(c, kUneven), InfeasibleError);
  c = config(0.5, 3);
  c.beta_min = 0.4;
  c.beta_max = 0.3;
  EXPECT_THROW(sample_strategies(c, kUneven), ConfigError);
  EXPECT_THROW(sample_strategies(config(0.5, 0), kUneven), ConfigError);
  EXPECT_THROW(sample_strategies(config(1.2, 3), kUneven), ConfigError);
}

TEST(Selection, TiesGoToLowestIndexAndTopKIsOrdered) {
  std::vector<CandidateRecord> recs(5);
  const double scores[5] = {0.3, 0.8, 0.5, 0.8, 0.1};
  for (int i = 0; i < 5; ++i) recs[i].pre_finetune_score = scores[i];
  EXPECT_EQ(select_best(recs), 1u);
  EXPECT_EQ(top_k(recs, 3), (std::vector<std::size_t>{1, 3, 2}));
  EXPECT_EQ(top_k(recs, 10).size(), 5u);
}

class SearchOnToyTask : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new Dataset(testing::toy_task(21, 160));
    model_ = new ModelCheckpoint(testing::trained_toy_model(*data_, 21, 3));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
  }
  static Dataset* data_;
  static ModelCheckpoint* model_;
};
Dataset* SearchOnToyTask::data_ = nullptr;
ModelCheckpoint* SearchOnToyTask::model_ = nullptr;

TEST_F(SearchOnToyTask, ZeroStrategyScoresLikeBaseline) {
  const double base = evaluate_model(*model_, *data_, MetricKind::accuracy);
  EXPECT_EQ(evaluate_candidate(*model_, uniform_strategy(2, 0.0), *data_,
                               MetricKind::accuracy),
            base);
}

TEST_F(SearchOnToyTask, FullyPrunedModelPredictsOneClass) {
  const ModelCheckpoint pruned = apply_strategy(*model_, uniform_strategy(2, 1.0));
  const Batch b = make_batches(*data_, data_->size()).front();
  const auto preds = argmax_rows(forward(pruned, b).logits);
  EXPECT_TRUE(std::all_of(preds.begin(), preds.end(),
                          [&](int p) { return p == preds[0]; }));
  std::size_t hits = 0;
  for (const auto& e : data_->examples) hits += e.label == preds[0];
  EXPECT_DOUBLE_EQ(evaluate_candidate(*model_, uniform_strategy(2, 1.0), *data_,
                                      MetricKind::accuracy),
                   static_cast<double>(hits) / data_->size());
}

TEST_F(SearchOnToyTask, MatchesPerExampleOracle) {
  Dataset small = *data_;
  small.examples.resize(32);
  PruningStrategy s;
  s.per_layer_ratios = {0.3, 0.7};
  const ModelCheckpoint pruned = apply_strategy(*model_, s);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < small.size(); ++i) {
    const std::vector<std::size_t> one{i};
    const auto logits = forward(pruned, make_batch(small, one)).logits;
    const int pred = logits(0, 1) > logits(0, 0) ? 1 : 0;
    correct += pred == small.examples[i].label;
  }
  EXPECT_DOUBLE_EQ(evaluate_candidate(*model_, s, small, MetricKind::accuracy),
                   correct / 32.0);
}

TEST_F(SearchOnToyTask, SingleCandidateIsBest) {
  const SearchReport r = run_search(config(0.5, 1), *model_, *data_);
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.best_index, 0u);
}

TEST_F(SearchOnToyTask, DeterministicAndLeavesCheckpointUntouched) {
  const std::string before = checkpoint_to_bytes(*model_);
  SearchConfig c = config(0.7, 8, 5);
  c.num_workers = 4;
  const SearchReport a = run_search(c, *model_, *data_);
  const SearchReport b = run_search(c, *model_, *data_);
  EXPECT_TRUE(same_results(a, b));
  c.num_workers = 1;
  SearchReport seq = run_search(c, *model_, *data_);
  seq.config.num_workers = 4;
  EXPECT_TRUE(same_results(a, seq));
  EXPECT_EQ(checkpoint_to_bytes(*model_), before);
}

TEST_F(SearchOnToyTask, BestEqualsSequentialReevaluation) {
  const SearchReport r = run_search(config(0.7, 16, 3), *model_, *data_);
  const Dataset train = data_->subset("train");
  double best = -1;
  for (const auto& c : r.candidates)
    best = std::max(best, evaluate_candidate(*model_, c.strategy, train,
                                             MetricKind::accuracy));
  EXPECT_EQ(r.candidates[r.best_index].pre_finetune_score, best);
  for (const auto& c : r.candidates) {
    EXPECT_GE(c.pre_finetune_score, 0.0);
    EXPECT_LE(c.pre_finetune_score, 1.0);
  }
}

TEST_F(SearchOnToyTask, EvaluationOrderDoesNotMatter) {
  auto strategies = sample_strategies(config(0.6, 6, 8), layer_sizes(model_->config));
  const auto fwd = evaluate_candidates(*model_, strategies, *data_,
                                       MetricKind::accuracy, 3);
  std::reverse(strategies.begin(), strategies.end());
  const auto rev = evaluate_candidates(*model_, strategies, *data_,
                                       MetricKind::accuracy, 2);
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    EXPECT_EQ(fwd[i].strategy, rev[fwd.size() - 1 - i].strategy);
    EXPECT_EQ(fwd[i].pre_finetune_score, rev[fwd.size() - 1 - i].pre_finetune_score);
  }
}

TEST_F(SearchOnToyTask, InputErrors) {
  SearchConfig c = config(0.5, 2);
  c.eval_split = "test";
  EXPECT_THROW(run_search(c, *model_, *data_), InputError);
  c = config(0.5, 2);
  c.metric = MetricKind::spearman;
  EXPECT_THROW(run_search(c, *model_, *data_), ConfigError);
  Dataset empty = *data_;
  empty.examples.clear();
  EXPECT_THROW(evaluate_candidate(*model_, uniform_strategy(2, 0.5), empty,
                                  MetricKind::accuracy),
               InputError);
}

TEST_F(SearchOnToyTask, CorrelationNeedsThreeCandidates) {
  EXPECT_THROW(correlation_study(config(0.5, 2), *model_, *data_, FinetuneConfig{}),
               StatisticsError);
}

TEST(Correlation, DegenerateCases) {
  const CorrelationResult same = correlate_pairs({0.1, 0.4, 0.3, 0.9}, {0.1, 0.4, 0.3, 0.9});
  EXPECT_NEAR(same.pearson_r, 1.0, 1e-12);
  EXPECT_NEAR(same.spearman_rho, 1.0, 1e-12);
  const CorrelationResult anti = correlate_pairs({1, 2, 3, 4}, {0.9, 0.5, 0.2, 0.1});
  EXPECT_NEAR(anti.spearman_rho, -1.0, 1e-12);
  EXPECT_THROW(correlate_pairs({1, 2}, {1, 2}), StatisticsError);
}

}  // namespace
}  // namespace prunesearch
