// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "prunesearch/errors.hpp"
#include "prunesearch/evaluation.hpp"
#include "prunesearch/rng.hpp"

namespace prunesearch {

namespace {

constexpr int kMaxRedistributionRounds = 100;
constexpr int kMaxResamples = 10000;
constexpr double kResidueTolerance = 1e-12;

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, jobs) on a small pool. The first exception wins and
// is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t jobs, std::size_t workers, F&& fn) {
  workers = worker_count(workers, jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = jobs;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Clamps to [lo, hi] and moves the residue onto layers that still have room,
// a uniform shift per round. Returns false if it does not settle.
bool redistribute(std::vector<double>& beta, std::span<const std::size_t> sizes,
                  double p, double lo, double hi) {
  double total = 0.0;
  for (auto s : sizes) total += static_cast<double>(s);
  for (int round = 0; round < kMaxRedistributionRounds; ++round) {
    for (auto& b : beta) b = std::clamp(b, lo, hi);
    const double residue = p - overall_ratio(beta, sizes);
    if (std::fabs(residue) <= kResidueTolerance) return true;
    double free_size = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
      if ((residue > 0 && beta[i] < hi) || (residue < 0 && beta[i] > lo))
        free_size += static_cast<double>(sizes[i]);
    }
    if (free_size == 0.0) return false;
    const double shift = residue * total / free_size;
    for (std::size_t i = 0; i < beta.size(); ++i) {
      if ((residue > 0 && beta[i] < hi) || (residue < 0 && beta[i] > lo))
        beta[i] += shift;
    }
  }
  return false;
}

PruningStrategy sample_one(const SearchConfig& cfg,
                           std::span<const std::size_t> sizes,
                           std::uint64_t id) {
  const double p = cfg.target_overall;
  const double lo = cfg.lower_clamp();
  const double hi = cfg.upper_clamp();
  PruningStrategy s;
  s.target_overall = p;
  s.strategy_id = id;
  s.seed = cfg.seed;
  // At a clamp boundary the only feasible vector is constant.
  if (p <= lo || p >= hi) {
    s.per_layer_ratios.assign(sizes.size(), p);
    return s;
  }
  Rng rng(cfg.seed, id);
  std::vector<double> beta(sizes.size());
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    for (auto& b : beta) b = rng.uniform(lo, hi);
    const double shift = p - overall_ratio(beta, sizes);
    for (auto& b : beta) b += shift;
    if (redistribute(beta, sizes, p, lo, hi)) {
      s.per_layer_ratios = beta;
      return s;
    }
  }
  throw InfeasibleError("could not sample a strategy meeting ratio " +
                        std::to_string(p));
}

}  // namespace

double SearchConfig::lower_clamp() const {
  return beta_min.value_or(std::max(0.0, target_overall - 0.25));
}

double SearchConfig::upper_clamp() const {
  return beta_max.value_or(std::min(1.0, target_overall + 0.25));
}

void SearchConfig::validate() const {
  if (num_candidates < 1) throw ConfigError("number of candidates must be >= 1");
  if (!(target_overall >= 0.0 && target_overall <= 1.0))
    throw ConfigError("target ratio " + std::to_string(target_overall) +
                      " outside [0, 1]");
  const double lo = lower_clamp(), hi = upper_clamp();
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi))
    throw ConfigError("layer ratio clamps must satisfy 0 <= min <= max <= 1");
  if (target_overall < lo || target_overall > hi)
    throw InfeasibleError("target ratio " + std::to_string(target_overall) +
                          " not reachable within clamps [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "]");
}

bool same_results(const SearchReport& a, const SearchReport& b) {
  if (!(a.config == b.config) || a.best_index != b.best_index ||
      a.seed != b.seed || a.code_version != b.code_version ||
      a.candidates.size() != b.candidates.size() ||
      a.finetune_runs.size() != b.finetune_runs.size())
    return false;
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    const auto& x = a.candidates[i];
    const auto& y = b.candidates[i];
    if (!(x.strategy == y.strategy) || x.pre_finetune_score != y.pre_finetune_score ||
        x.post_finetune_score != y.post_finetune_score)
      return false;
  }
  for (std::size_t i = 0; i < a.finetune_runs.size(); ++i) {
    auto x = a.finetune_runs[i];
    auto y = b.finetune_runs[i];
    x.log.wall_time_s = y.log.wall_time_s = 0.0;
    if (x.candidate_index != y.candidate_index || x.kd != y.kd || !(x.log == y.log))
      return false;
  }
  return true;
}

std::size_t select_best(std::span<const CandidateRecord> candidates) {
  if (candidates.empty()) throw DomainError("no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].pre_finetune_score > candidates[best].pre_finetune_score)
      best = i;
  }
  return best;
}

std::vector<std::size_t> top_k(std::span<const CandidateRecord> candidates,
                               std::size_t k) {
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].pre_finetune_score > candidates[b].pre_finetune_score;
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

std::vector<PruningStrategy> sample_strategies(
    const SearchConfig& cfg, std::span<const std::size_t> layer_sizes) {
  cfg.validate();
  if (layer_sizes.empty()) throw ConfigError("model has no layers to prune");
  std::vector<PruningStrategy> out;
  out.reserve(cfg.num_candidates);
  for (std::size_t j = 0; j < cfg.num_candidates; ++j)
    out.push_back(sample_one(cfg, layer_sizes, j));
  return out;
}

double evaluate_candidate(const ModelCheckpoint& model,
                          const PruningStrategy& strategy, const Dataset& data,
                          MetricKind metric) {
  if (data.size() == 0) throw InputError("evaluation data is empty");
  check_metric_fits(metric, data);
  return evaluate_model(apply_strategy(model, strategy), data, metric);
}

std::vector<CandidateRecord> evaluate_candidates(
    const ModelCheckpoint& model, std::span<const PruningStrategy> strategies,
    const Dataset& data, MetricKind metric, std::size_t num_workers) {
  std::vector<CandidateRecord> records(strategies.size());
  parallel_for(strategies.size(), num_workers, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    CandidateRecord r;
    r.strategy = strategies[i];
    try {
      r.pre_finetune_score = evaluate_candidate(model, strategies[i], data, metric);
    } catch (const ConfigError& e) {
      throw ConfigError("candidate " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw InputError("candidate " + std::to_string(i) + ": " + e.what());
    }
    r.eval_wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records[i] = std::move(r);
  });
  return records;
}

SearchReport run_search(const SearchConfig& cfg,
                        const ModelCheckpoint& checkpoint, const Dataset& data) {
  cfg.validate();
  const Dataset eval = data.subset(cfg.eval_split);
  if (eval.size() == 0)
    throw InputError("no examples in split '" + cfg.eval_split + "'");
  check_metric_fits(cfg.metric, eval);
  const auto sizes = layer_sizes(checkpoint.config);
  const auto strategies = sample_strategies(cfg, sizes);
  SearchReport report;
  report.config = cfg;
  report.seed = cfg.seed;
  report.candidates =
      evaluate_candidates(checkpoint, strategies, eval, cfg.metric, cfg.num_workers);
  report.best_index = select_best(report.candidates);
  return report;
}

CorrelationResult correlate_pairs(std::vector<double> pre,
                                  std::vector<double> post) {
  if (pre.size() != post.size())
    throw DimensionError("correlation needs paired scores");
  if (pre.size() < 3)
    throw StatisticsError("correlation needs at least 3 candidates, got " +
                          std::to_string(pre.size()));
  CorrelationResult r;
  r.pearson_r = pearson(pre, post);
  r.spearman_rho = metric_spearman(pre, post);
  r.pre_scores = std::move(pre);
  r.post_scores = std::move(post);
  return r;
}

CorrelationResult correlation_study(const SearchConfig& cfg,
                                    const ModelCheckpoint& checkpoint,
                                    const Dataset& data,
                                    const FinetuneConfig& finetune_cfg) {
  if (cfg.num_candidates < 3)
    throw StatisticsError("correlation study needs at least 3 candidates");
  finetune_cfg.validate();
  cfg.validate();
  const Dataset train = data.subset("train");
  const Dataset eval = data.subset(cfg.eval_split);
  if (train.size() == 0 || eval.size() == 0)
    throw InputError("correlation study needs train and evaluation examples");
  const auto strategies = sample_strategies(cfg, layer_sizes(checkpoint.config));
  std::vector<double> pre(strategies.size()), post(strategies.size());
  FinetuneConfig ft = finetune_cfg;
  ft.metric = cfg.metric;
  parallel_for(strategies.size(), cfg.num_workers, [&](std::size_t i) {
    const PruneMask masks = strategy_masks(checkpoint, strategies[i]);
    ModelCheckpoint pruned = checkpoint;
    apply_masks(pruned, masks);
    pre[i] = evaluate_model(pruned, eval, cfg.metric);
    const FinetuneResult tuned = finetune(pruned, masks, train, ft, &eval);
    post[i] = tuned.log.final_score;
  });
  return correlate_pairs(std::move(pre), std::move(post));
}

}  // namespace prunesearch
