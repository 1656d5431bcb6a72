// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "prunesearch/bench.hpp"
#include "prunesearch/errors.hpp"
#include "prunesearch/pruning.hpp"

namespace prunesearch {
namespace {

EncoderConfig bench_config() {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden_size = 128;
  c.num_heads = 4;
  c.ffn_size = 512;
  c.max_seq_len = 32;
  c.vocab_size = 100;
  c.num_outputs = 2;
  return c;
}

TEST(Summarize, MatchesSortedOracle) {
  const std::vector<double> s{5, 1, 4, 2, 3, 10, 9, 8, 7, 6};
  const LatencySummary sum = summarize(s);
  EXPECT_DOUBLE_EQ(sum.median, 5.5);
  EXPECT_DOUBLE_EQ(sum.mean, 5.5);
  EXPECT_DOUBLE_EQ(sum.min, 1.0);
  // Nearest rank: ceil(0.9 * 10) = 9th smallest.
  EXPECT_DOUBLE_EQ(sum.p90, 9.0);
  const std::vector<double> odd{3, 1, 2};
  EXPECT_DOUBLE_EQ(summarize(odd).median, 2.0);
  EXPECT_DOUBLE_EQ(summarize(odd).p90, 3.0);
  EXPECT_THROW(summarize(std::vector<double>{}), DomainError);
}

TEST(BenchResult, ThroughputIsReciprocalOfMedian) {
  std::vector<double> s(30);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 2.0 + 0.01 * i;
  const BenchResult r = make_bench_result("dense", 8, s, 5, 0.0);
  EXPECT_NEAR(r.throughput * r.median_ms / 1000.0, 8.0, 1e-9);
  EXPECT_NEAR(r.jitter_bound, (r.p90_ms - r.min_ms) / r.median_ms, 1e-12);
  EXPECT_EQ(r.reps, 30u);
  const std::string line = bench_result_json(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_NE(line.find("\"variant\":\"dense\""), std::string::npos);
}

TEST(BenchConfig, EnforcesMinimums) {
  const EncoderConfig c = bench_config();
  BenchConfig b;
  EXPECT_NO_THROW(b.validate(c));
  b.reps = kMinBenchReps - 1;
  EXPECT_THROW(b.validate(c), ConfigError);
  b.reps = kMinBenchReps;
  b.warmup = kMinBenchWarmup - 1;
  EXPECT_THROW(b.validate(c), ConfigError);
  b.warmup = kMinBenchWarmup;
  b.seq_len = c.max_seq_len + 1;
  EXPECT_THROW(b.validate(c), ConfigError);
  b.seq_len = 8;
  b.batch_size = 0;
  EXPECT_THROW(b.validate(c), ConfigError);
}

TEST(Bench, SparseFasterAtHighSparsity) {
  const ModelCheckpoint dense = init_model(bench_config(), 3);
  const ModelCheckpoint pruned = apply_strategy(dense, uniform_strategy(2, 0.9));
  BenchConfig b;
  b.seq_len = 32;
  const auto [d, s] = bench_encoder(pruned, b);
  EXPECT_EQ(d.variant, "dense");
  EXPECT_EQ(s.variant, "sparse");
  EXPECT_NEAR(s.sparsity, 0.9, 1e-3);
  EXPECT_LT(s.median_ms, d.median_ms) << "dense " << d.median_ms << " sparse " << s.median_ms;
}

TEST(Bench, SparseWithinTwiceDenseWhenUnpruned) {
  const ModelCheckpoint dense = init_model(bench_config(), 4);
  BenchConfig b;
  const auto [d, s] = bench_encoder(dense, b);
  EXPECT_EQ(s.sparsity, 0.0);
  EXPECT_LE(s.median_ms, 2.0 * d.median_ms) << "dense " << d.median_ms << " sparse " << s.median_ms;
}

}  // namespace
}  // namespace prunesearch
