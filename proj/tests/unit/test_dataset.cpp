// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "prunesearch/dataset.hpp"
#include "prunesearch/errors.hpp"
#include "prunesearch/evaluation.hpp"
#include "test_util.hpp"

namespace prunesearch {
namespace {

TEST(Synthetic, Deterministic) {
  SyntheticTaskSpec s;
  s.seed = 11;
  EXPECT_EQ(dataset_to_text(generate_synthetic_task(s)),
            dataset_to_text(generate_synthetic_task(s)));
  SyntheticTaskSpec t = s;
  t.seed = 12;
  EXPECT_NE(generate_synthetic_task(s), generate_synthetic_task(t));
}

TEST(Synthetic, BalancedClassCounts) {
  SyntheticTaskSpec s;
  s.num_examples = 1000;
  s.seed = 3;
  const Dataset d = generate_synthetic_task(s);
  std::size_t ones = 0;
  for (const auto& e : d.examples) ones += e.label == 1;
  EXPECT_GE(ones, 450u);
  EXPECT_LE(ones, 550u);
}

TEST(Synthetic, StructureAndSplits) {
  SyntheticTaskSpec s;
  s.num_examples = 100;
  s.dev_fraction = 0.25;
  const Dataset d = generate_synthetic_task(s);
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.subset("train").size(), 75u);
  EXPECT_EQ(d.subset("dev").size(), 25u);
  for (const auto& e : d.examples) {
    ASSERT_FALSE(e.token_ids.empty());
    EXPECT_EQ(e.token_ids[0], kClsToken);
    EXPECT_LE(e.token_ids.size(), s.seq_len);
    for (std::size_t t = 1; t < e.token_ids.size(); ++t)
      EXPECT_GE(e.token_ids[t], kFirstContentToken);
  }
}

TEST(Synthetic, RegressionTargetsAreBoundedAndVaried) {
  SyntheticTaskSpec s;
  s.kind = TaskKind::regression;
  s.num_classes = 1;
  s.num_examples = 200;
  const Dataset d = generate_synthetic_task(s);
  double lo = 1e9, hi = -1e9;
  for (const auto& e : d.examples) {
    EXPECT_TRUE(std::isfinite(e.target));
    lo = std::min<double>(lo, e.target);
    hi = std::max<double>(hi, e.target);
  }
  EXPECT_LT(lo, -0.3);
  EXPECT_GT(hi, 0.3);
  EXPECT_LE(hi, 1.0);
}

// With no signal, a model trained on one half cannot predict the other half.
TEST(Synthetic, ZeroSignalIsChanceOnHeldOut) {
  const Dataset d = testing::toy_task(5, 600, 0.0);
  const ModelCheckpoint m = testing::trained_toy_model(d, 5, 3);
  const double acc = evaluate_model(m, d.subset("dev"), MetricKind::accuracy);
  EXPECT_LT(acc, 0.5 + 3.0 * std::sqrt(0.25 / 150.0) + 0.02);
}

TEST(Synthetic, FullSignalIsLearnable) {
  const Dataset d = testing::toy_task(6, 512, 1.0);
  const ModelCheckpoint m = testing::trained_toy_model(d, 6, 6);
  EXPECT_GT(evaluate_model(m, d.subset("dev"), MetricKind::accuracy), 0.9);
}

TEST(Synthetic, InvalidParameters) {
  SyntheticTaskSpec s;
  s.num_examples = 0;
  EXPECT_THROW(generate_synthetic_task(s), ConfigError);
  s = {};
  s.signal_to_noise = 1.5;
  EXPECT_THROW(generate_synthetic_task(s), ConfigError);
}

TEST(DatasetFile, RoundTrip) {
  testing::TempDir dir("dataset");
  const Dataset d = testing::toy_task(9, 64);
  write_dataset(d, dir / "d.json");
  EXPECT_EQ(read_dataset(dir / "d.json"), d);
  SyntheticTaskSpec s;
  s.kind = TaskKind::regression;
  s.num_classes = 1;
  s.num_examples = 20;
  const Dataset r = generate_synthetic_task(s);
  EXPECT_EQ(dataset_from_text(dataset_to_text(r)), r);
}

TEST(DatasetFile, RejectsMalformedInput) {
  EXPECT_THROW(dataset_from_text("{"), FormatError);
  EXPECT_THROW(dataset_from_text(R"({"format":"other"})"), FormatError);
  const std::string ok = dataset_to_text(testing::toy_task(1, 4));
  std::string bad_version = ok;
  bad_version.replace(bad_version.find("\"schema_version\":1"), 18,
                      "\"schema_version\":9");
  EXPECT_THROW(dataset_from_text(bad_version), FormatError);
}

TEST(DatasetFile, RejectsOutOfVocabIds) {
  Dataset d = testing::toy_task(1, 4);
  d.examples[0].token_ids.push_back(static_cast<std::int32_t>(d.vocab_size));
  EXPECT_THROW(dataset_from_text(dataset_to_text(d)), Error);
  EXPECT_THROW(d.validate(), InputError);
}

TEST(Batching, PadsToLongestAndKeepsLabels) {
  const Dataset d = testing::toy_task(2, 10);
  const std::vector<std::size_t> idx{0, 1, 2};
  const Batch b = make_batch(d, idx);
  ASSERT_EQ(b.size(), 3u);
  std::size_t longest = 0;
  for (auto i : idx) longest = std::max(longest, d.examples[i].token_ids.size());
  for (std::size_t r = 0; r < 3; ++r) {
    ASSERT_EQ(b.token_ids[r].size(), longest);
    const auto& src = d.examples[idx[r]].token_ids;
    for (std::size_t t = 0; t < longest; ++t) {
      EXPECT_EQ(b.mask[r][t], t < src.size());
      EXPECT_EQ(b.token_ids[r][t], t < src.size() ? src[t] : kPadToken);
    }
    EXPECT_EQ(std::get<std::vector<int>>(b.labels)[r], d.examples[idx[r]].label);
  }
  const auto batches = make_batches(d, 4);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches.back().size(), 2u);
}

}  // namespace
}  // namespace prunesearch
