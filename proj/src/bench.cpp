// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "json.hpp"

#include "prunesearch/dataset.hpp"
#include "prunesearch/errors.hpp"
#include "prunesearch/pruning.hpp"
#include "prunesearch/rng.hpp"

namespace prunesearch {

namespace {

Batch random_batch(const EncoderConfig& cfg, const BenchConfig& bc) {
  Rng rng(bc.seed);
  Batch b;
  for (std::size_t i = 0; i < bc.batch_size; ++i) {
    std::vector<std::int32_t> ids(bc.seq_len);
    ids[0] = kClsToken;
    for (std::size_t t = 1; t < bc.seq_len; ++t)
      ids[t] = static_cast<std::int32_t>(rng.below(cfg.vocab_size));
    b.token_ids.push_back(std::move(ids));
    b.mask.emplace_back(bc.seq_len, 1);
  }
  return b;
}

template <typename M>
double time_once(const M& model, const Batch& batch) {
  const auto t0 = std::chrono::steady_clock::now();
  const ForwardOutput out = forward(model, batch);
  const auto t1 = std::chrono::steady_clock::now();
  // Keep the result observable so the call cannot be elided.
  volatile float sink = out.logits(0, 0);
  (void)sink;
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

void BenchConfig::validate(const EncoderConfig& model) const {
  if (batch_size < 1) throw ConfigError("bench batch size must be >= 1");
  if (seq_len < 1 || seq_len > model.max_seq_len)
    throw ConfigError("bench sequence length must be in [1, " +
                      std::to_string(model.max_seq_len) + "]");
  if (reps < kMinBenchReps)
    throw ConfigError("bench needs at least " + std::to_string(kMinBenchReps) +
                      " repetitions");
  if (warmup < kMinBenchWarmup)
    throw ConfigError("bench needs at least " + std::to_string(kMinBenchWarmup) +
                      " warmup iterations");
}

LatencySummary summarize(std::span<const double> samples_ms) {
  if (samples_ms.empty()) throw DomainError("no timing samples");
  std::vector<double> s(samples_ms.begin(), samples_ms.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  LatencySummary out;
  out.median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  double sum = 0.0;
  for (double v : s) sum += v;
  out.mean = sum / static_cast<double>(n);
  out.min = s.front();
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
  out.p90 = s[std::max<std::size_t>(rank, 1) - 1];
  return out;
}

BenchResult make_bench_result(std::string variant, std::size_t batch_size,
                              std::span<const double> samples_ms,
                              std::size_t warmup, double sparsity) {
  const LatencySummary s = summarize(samples_ms);
  BenchResult r;
  r.variant = std::move(variant);
  r.batch_size = batch_size;
  r.median_ms = s.median;
  r.mean_ms = s.mean;
  r.min_ms = s.min;
  r.p90_ms = s.p90;
  r.throughput = static_cast<double>(batch_size) * 1000.0 / s.median;
  r.reps = samples_ms.size();
  r.warmup = warmup;
  r.sparsity = sparsity;
  r.jitter_bound = s.median > 0.0 ? (s.p90 - s.min) / s.median : 0.0;
  return r;
}

std::pair<BenchResult, BenchResult> bench_encoder(const ModelCheckpoint& model,
                                                  const BenchConfig& cfg) {
  cfg.validate(model.config);
  const SparseModel sparse = to_sparse(model);
  const Batch batch = random_batch(model.config, cfg);
  const double sp = encoder_sparsity(model);
  for (std::size_t i = 0; i < cfg.warmup; ++i) {
    time_once(model, batch);
    time_once(sparse, batch);
  }
  std::vector<double> dense_ms, sparse_ms;
  for (std::size_t i = 0; i < cfg.reps; ++i) {
    dense_ms.push_back(time_once(model, batch));
    sparse_ms.push_back(time_once(sparse, batch));
  }
  return {make_bench_result("dense", cfg.batch_size, dense_ms, cfg.warmup, sp),
          make_bench_result("sparse", cfg.batch_size, sparse_ms, cfg.warmup, sp)};
}

std::string bench_result_json(const BenchResult& r) {
  const nlohmann::json j = {{"variant", r.variant},     {"batch_size", r.batch_size},
                            {"median_ms", r.median_ms}, {"mean_ms", r.mean_ms},
                            {"min_ms", r.min_ms},       {"p90_ms", r.p90_ms},
                            {"throughput", r.throughput}, {"reps", r.reps},
                            {"warmup", r.warmup},       {"sparsity", r.sparsity},
                            {"jitter_bound", r.jitter_bound}};
  return j.dump();
}

}  // namespace prunesearch
