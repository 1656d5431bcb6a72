// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "CLI11.hpp"
#include "prunesearch/bench.hpp"
#include "prunesearch/checkpoint_io.hpp"
#include "prunesearch/dataset.hpp"
#include "prunesearch/errors.hpp"
#include "prunesearch/evaluation.hpp"
#include "prunesearch/file_util.hpp"
#include "prunesearch/finetune.hpp"
#include "prunesearch/pruning.hpp"
#include "prunesearch/report.hpp"
#include "prunesearch/scheduler.hpp"
#include "prunesearch/search.hpp"

namespace prunesearch {

namespace {

namespace fs = std::filesystem;

const char* error_kind(int code) {
  switch (code) {
    case kExitUsage: return "usage";
    case kExitInput: return "input";
    case kExitInfeasible: return "config";
    case kExitNumeric: return "numeric";
    default: return "internal";
  }
}

void print_error(std::ostream& err, int code, const std::string& message) {
  const nlohmann::json j = {{"error", error_kind(code)},
                            {"code", code},
                            {"message", message}};
  err << j.dump() << '\n';
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw InputError(std::string(flag) + " is required");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec))
    throw InputError(std::string(flag) + ": no such file '" + path + "'");
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

MetricKind resolve_metric(const std::string& name, const Dataset& data) {
  if (name == "auto")
    return data.kind == TaskKind::classification ? MetricKind::accuracy
                                                 : MetricKind::spearman;
  return parse_metric_kind(name);
}

// Options shared by the training commands.
struct TrainFlags {
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::string optimizer = "adam";

  void add(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Mini-batch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--lr", lr, "Learning rate")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--optimizer", optimizer, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}))
        ->capture_default_str();
  }

  FinetuneConfig config(std::uint64_t seed, MetricKind metric) const {
    FinetuneConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = lr;
    c.seed = seed;
    c.optimizer = parse_optimizer_kind(optimizer);
    c.metric = metric;
    return c;
  }
};

struct InitArgs {
  std::string out, dataset;
  std::uint64_t seed = 0;
  EncoderConfig config;
};

int cmd_init(const InitArgs& a, std::ostream& out, std::ostream& err) {
  EncoderConfig cfg = a.config;
  if (!a.dataset.empty()) {
    require_file(a.dataset, "--dataset");
    cfg = config_for(read_dataset(a.dataset), cfg);
  }
  cfg.validate();
  err << "init: " << cfg.num_layers << " layers, hidden " << cfg.hidden_size
      << ", " << cfg.num_heads << " heads\n";
  const ModelCheckpoint model = init_model(cfg, a.seed);
  write_checkpoint(model, a.out);
  out << "checkpoint=" << a.out << " checksum=" << to_hex(checkpoint_checksum(model))
      << '\n';
  return kExitOk;
}

struct GenDataArgs {
  std::string out, task = "classification";
  SyntheticTaskSpec spec;
};

int cmd_gen_data(GenDataArgs a, std::ostream& out, std::ostream&) {
  a.spec.kind = parse_task_kind(a.task);
  if (a.spec.kind == TaskKind::regression) a.spec.num_classes = 1;
  const Dataset data = generate_synthetic_task(a.spec);
  write_dataset(data, a.out);
  out << "dataset=" << a.out << " examples=" << data.size()
      << " train=" << data.subset("train").size()
      << " dev=" << data.subset("dev").size() << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string checkpoint, dataset, out, metric = "auto", log;
  std::uint64_t seed = 0;
  TrainFlags train;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.checkpoint, "--checkpoint");
  require_file(a.dataset, "--dataset");
  const ModelCheckpoint model = read_checkpoint(a.checkpoint);
  const Dataset data = read_dataset(a.dataset);
  const MetricKind metric = resolve_metric(a.metric, data);
  const Dataset train = data.subset("train");
  const Dataset dev = data.subset("dev");
  const Dataset* eval = dev.size() > 0 ? &dev : nullptr;
  const FinetuneConfig cfg = a.train.config(a.seed, metric);
  err << "train: " << train.size() << " examples, " << cfg.epochs << " epochs\n";
  const FinetuneResult r = finetune(model, {}, train, cfg, eval);
  for (std::size_t e = 0; e < r.log.epoch_loss.size(); ++e)
    err << "epoch " << e + 1 << " loss " << fmt("%.6f", r.log.epoch_loss[e])
        << " score " << fmt("%.4f", r.log.epoch_score[e]) << '\n';
  write_checkpoint(r.model, a.out);
  if (!a.log.empty()) write_report(r.log, a.log);
  out << "checkpoint=" << a.out << " " << to_string(metric) << "="
      << fmt("%.6f", r.log.final_score) << '\n';
  return kExitOk;
}

struct SearchArgs {
  std::string checkpoint, dataset, out, metric = "auto", eval_split = "train";
  double ratio = 0.5;
  std::size_t candidates = 16, workers = 0;
  std::uint64_t seed = 0;
  std::optional<double> beta_min, beta_max;
};

SearchConfig search_config(const SearchArgs& a, const Dataset& data) {
  SearchConfig cfg;
  cfg.target_overall = a.ratio;
  cfg.num_candidates = a.candidates;
  cfg.seed = a.seed;
  cfg.beta_min = a.beta_min;
  cfg.beta_max = a.beta_max;
  cfg.metric = resolve_metric(a.metric, data);
  cfg.eval_split = a.eval_split;
  cfg.num_workers = a.workers;
  cfg.validate();
  return cfg;
}

int cmd_search(const SearchArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.checkpoint, "--checkpoint");
  require_file(a.dataset, "--dataset");
  const Dataset data = read_dataset(a.dataset);
  const SearchConfig cfg = search_config(a, data);
  const ModelCheckpoint model = read_checkpoint(a.checkpoint);
  err << "search: " << cfg.num_candidates << " candidates at ratio " << cfg.target_overall
      << " on split '" << cfg.eval_split << "'\n";
  const SearchReport report = run_search(cfg, model, data);
  for (std::size_t i = 0; i < report.candidates.size(); ++i)
    err << "candidate " << i << " score "
        << fmt("%.6f", report.candidates[i].pre_finetune_score) << '\n';
  write_report(report, a.out);
  out << "report=" << a.out << " best_index=" << report.best_index << " "
      << to_string(cfg.metric) << "="
      << fmt("%.6f", report.candidates[report.best_index].pre_finetune_score) << '\n';
  return kExitOk;
}

struct FinetuneArgs {
  std::string checkpoint, dataset, report, out, report_out, teacher;
  std::optional<std::size_t> candidate;
  std::size_t top_k = 1;
  double kd_weight = 1.0;
  std::uint64_t seed = 0;
  TrainFlags train;
};

int cmd_finetune(const FinetuneArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.checkpoint, "--checkpoint");
  require_file(a.dataset, "--dataset");
  require_file(a.report, "--report");
  if (!a.teacher.empty()) require_file(a.teacher, "--teacher");
  SearchReport report = read_search_report(a.report);
  std::vector<std::size_t> chosen;
  if (a.candidate) {
    if (*a.candidate >= report.candidates.size())
      throw InputError("--candidate " + std::to_string(*a.candidate) +
                       " out of range (report has " +
                       std::to_string(report.candidates.size()) + ")");
    chosen.push_back(*a.candidate);
  } else {
    chosen = top_k(report.candidates, a.top_k);
  }
  const ModelCheckpoint dense = read_checkpoint(a.checkpoint);
  std::optional<ModelCheckpoint> teacher;
  if (!a.teacher.empty()) teacher = read_checkpoint(a.teacher);
  const Dataset data = read_dataset(a.dataset);
  const Dataset train = data.subset("train");
  const Dataset eval = data.subset(report.config.eval_split);
  if (eval.size() == 0)
    throw InputError("no examples in split '" + report.config.eval_split + "'");
  FinetuneConfig cfg = a.train.config(a.seed, report.config.metric);
  cfg.kd_enabled = teacher.has_value();
  cfg.kd_weight = a.kd_weight;

  std::optional<ModelCheckpoint> best_model;
  double best_score = 0.0;
  std::size_t best_index = 0;
  for (std::size_t idx : chosen) {
    const PruningStrategy& s = report.candidates[idx].strategy;
    const PruneMask masks = strategy_masks(dense, s);
    err << "finetune: candidate " << idx << (teacher ? " with distillation" : "")
        << '\n';
    FinetuneResult r = teacher ? kd_finetune(dense, masks, *teacher, train, cfg, &eval)
                               : finetune(dense, masks, train, cfg, &eval);
    for (std::size_t e = 0; e < r.log.epoch_loss.size(); ++e)
      err << "epoch " << e + 1 << " loss " << fmt("%.6f", r.log.epoch_loss[e])
          << " score " << fmt("%.4f", r.log.epoch_score[e]) << '\n';
    report.candidates[idx].post_finetune_score = r.log.final_score;
    report.finetune_runs.push_back({idx, teacher.has_value(), r.log});
    if (!best_model || r.log.final_score > best_score) {
      best_score = r.log.final_score;
      best_index = idx;
      best_model = std::move(r.model);
    }
  }
  write_checkpoint(*best_model, a.out);
  write_report(report, a.report_out.empty() ? a.report : a.report_out);
  out << "checkpoint=" << a.out << " candidate=" << best_index
      << " pre_score=" << fmt("%.6f", report.candidates[best_index].pre_finetune_score)
      << " post_score=" << fmt("%.6f", best_score)
      << " sparsity=" << fmt("%.4f", encoder_sparsity(*best_model)) << '\n';
  return kExitOk;
}

struct CorrelateArgs {
  SearchArgs search;
  TrainFlags train;
};

int cmd_correlate(const CorrelateArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.search.checkpoint, "--checkpoint");
  require_file(a.search.dataset, "--dataset");
  const Dataset data = read_dataset(a.search.dataset);
  const SearchConfig cfg = search_config(a.search, data);
  const FinetuneConfig ft = a.train.config(a.search.seed, cfg.metric);
  const ModelCheckpoint model = read_checkpoint(a.search.checkpoint);
  err << "correlate: " << cfg.num_candidates << " candidates, " << ft.epochs
      << " epochs each\n";
  const CorrelationResult r = correlation_study(cfg, model, data, ft);
  out << "candidate pre_score post_score\n";
  for (std::size_t i = 0; i < r.pre_scores.size(); ++i)
    out << i << ' ' << fmt("%.6f", r.pre_scores[i]) << ' '
        << fmt("%.6f", r.post_scores[i]) << '\n';
  out << "pearson_r=" << fmt("%.6f", r.pearson_r)
      << " spearman_rho=" << fmt("%.6f", r.spearman_rho) << '\n';
  if (!a.search.out.empty()) write_report(r, a.search.out);
  return kExitOk;
}

struct ScheduleArgs {
  std::string fixture, out, mode = "greedy";
};

int cmd_schedule(const ScheduleArgs& a, std::ostream& out, std::ostream&) {
  require_file(a.fixture, "--fixture");
  const ScheduleFixture f = read_schedule_fixture(a.fixture);
  const SchedulePlan plan = a.mode == "greedy"
                                ? greedy_schedule(f.operations, f.budget)
                                : sequential_plan(f.operations, f.budget);
  out << format_schedule_table(plan, f);
  if (!a.out.empty()) write_report(plan, a.out);
  return kExitOk;
}

struct BenchArgs {
  std::string checkpoint, out;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  BenchConfig bench;
  std::optional<std::size_t> seq_len;
};

int cmd_bench(BenchArgs a, std::ostream& out, std::ostream& err) {
  require_file(a.checkpoint, "--checkpoint");
  ModelCheckpoint model = read_checkpoint(a.checkpoint);
  a.bench.seed = a.seed;
  a.bench.seq_len = a.seq_len.value_or(model.config.max_seq_len);
  a.bench.validate(model.config);
  if (a.ratio > 0.0)
    model = apply_strategy(model, uniform_strategy(model.config.num_layers, a.ratio));
  err << "bench: sparsity " << fmt("%.4f", encoder_sparsity(model)) << ", "
      << a.bench.warmup << " warmup + " << a.bench.reps << " timed runs\n";
  const auto [dense, sparse] = bench_encoder(model, a.bench);
  const std::string lines =
      bench_result_json(dense) + "\n" + bench_result_json(sparse) + "\n";
  out << lines << "speedup=" << fmt("%.3f", dense.median_ms / sparse.median_ms) << '\n';
  if (!a.out.empty()) write_file_atomic(a.out, lines);
  return kExitOk;
}

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
}

void add_search_flags(CLI::App* cmd, SearchArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "Dense checkpoint")->required();
  cmd->add_option("--dataset", a.dataset, "Dataset file")->required();
  cmd->add_option("--ratio", a.ratio, "Overall pruning ratio p")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--candidates", a.candidates, "Number of sampled strategies")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--metric", a.metric, "auto, accuracy, f1 or spearman")
      ->check(CLI::IsMember({"auto", "accuracy", "f1", "spearman"}))
      ->capture_default_str();
  cmd->add_option("--eval-split", a.eval_split, "Split used to score candidates")
      ->capture_default_str();
  cmd->add_option("--beta-min", a.beta_min, "Lower clamp on layer ratios")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--beta-max", a.beta_max, "Upper clamp on layer ratios")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--workers", a.workers, "Evaluation threads (0 = all cores)")
      ->capture_default_str();
  add_seed(cmd, a.seed);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InfeasibleError*>(&e)) return kExitInfeasible;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitInfeasible;
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e))
    return kExitInput;
  if (dynamic_cast<const NumericError*>(&e) ||
      dynamic_cast<const StatisticsError*>(&e) ||
      dynamic_cast<const DomainError*>(&e))
    return kExitNumeric;
  return 1;
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Per-layer pruning strategy search for transformer encoders"};
  app.name("prunesearch");
  app.require_subcommand(1);

  InitArgs init;
  auto* c_init = app.add_subcommand("init", "Write a randomly initialized checkpoint");
  c_init->add_option("--out", init.out, "Output checkpoint")->required();
  c_init->add_option("--dataset", init.dataset,
                     "Take vocab, outputs and sequence length from this dataset");
  c_init->add_option("--layers", init.config.num_layers)->check(CLI::PositiveNumber);
  c_init->add_option("--hidden", init.config.hidden_size)->check(CLI::PositiveNumber);
  c_init->add_option("--heads", init.config.num_heads)->check(CLI::PositiveNumber);
  c_init->add_option("--ffn", init.config.ffn_size)->check(CLI::PositiveNumber);
  c_init->add_option("--max-seq-len", init.config.max_seq_len)
      ->check(CLI::PositiveNumber);
  c_init->add_option("--vocab", init.config.vocab_size)->check(CLI::PositiveNumber);
  c_init->add_option("--outputs", init.config.num_outputs)->check(CLI::PositiveNumber);
  add_seed(c_init, init.seed);

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic task");
  c_gen->add_option("--out", gen.out, "Output dataset")->required();
  c_gen->add_option("--task", gen.task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}))
      ->capture_default_str();
  c_gen->add_option("--examples", gen.spec.num_examples)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_gen->add_option("--vocab", gen.spec.vocab_size)->capture_default_str();
  c_gen->add_option("--seq-len", gen.spec.seq_len)->capture_default_str();
  c_gen->add_option("--classes", gen.spec.num_classes)->capture_default_str();
  c_gen->add_option("--snr", gen.spec.signal_to_noise, "Signal-to-noise in [0, 1]")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_gen->add_option("--dev-fraction", gen.spec.dev_fraction)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  add_seed(c_gen, gen.spec.seed);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a dense checkpoint");
  c_train->add_option("--checkpoint", train.checkpoint, "Initial checkpoint")
      ->required();
  c_train->add_option("--dataset", train.dataset)->required();
  c_train->add_option("--out", train.out, "Trained checkpoint")->required();
  c_train->add_option("--metric", train.metric)
      ->check(CLI::IsMember({"auto", "accuracy", "f1", "spearman"}))
      ->capture_default_str();
  c_train->add_option("--log", train.log, "Write the training log here");
  train.train.add(c_train);
  add_seed(c_train, train.seed);

  SearchArgs search;
  auto* c_search = app.add_subcommand("search", "Sample, prune and rank strategies");
  add_search_flags(c_search, search);
  c_search->add_option("--out", search.out, "Search report")->required();

  FinetuneArgs ft;
  auto* c_ft = app.add_subcommand("finetune", "Fine-tune searched candidates");
  c_ft->add_option("--checkpoint", ft.checkpoint, "Dense checkpoint")->required();
  c_ft->add_option("--dataset", ft.dataset)->required();
  c_ft->add_option("--report", ft.report, "Search report")->required();
  c_ft->add_option("--out", ft.out, "Fine-tuned checkpoint")->required();
  c_ft->add_option("--report-out", ft.report_out,
                   "Updated report (default: overwrite --report)");
  auto* cand = c_ft->add_option("--candidate", ft.candidate, "Candidate index");
  c_ft->add_option("--top-k", ft.top_k, "Fine-tune the k best candidates")
      ->check(CLI::PositiveNumber)
      ->excludes(cand);
  c_ft->add_option("--teacher", ft.teacher, "Dense teacher for distillation");
  c_ft->add_option("--kd-weight", ft.kd_weight, "Distillation weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  ft.train.add(c_ft);
  add_seed(c_ft, ft.seed);

  CorrelateArgs corr;
  auto* c_corr = app.add_subcommand("correlate",
                                    "Correlate pre- and post-finetune scores");
  add_search_flags(c_corr, corr.search);
  c_corr->add_option("--out", corr.search.out, "Correlation report");
  corr.train.add(c_corr);

  ScheduleArgs sched;
  auto* c_sched = app.add_subcommand("schedule", "Allocate hardware parallelism");
  c_sched->add_option("--fixture", sched.fixture, "Operation/budget file")
      ->required();
  c_sched->add_option("--mode", sched.mode, "greedy or sequential")
      ->check(CLI::IsMember({"greedy", "sequential"}))
      ->capture_default_str();
  c_sched->add_option("--out", sched.out, "Plan report");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time dense vs CSR inference");
  c_bench->add_option("--checkpoint", bench.checkpoint)->required();
  c_bench->add_option("--ratio", bench.ratio, "Uniform magnitude pruning first")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_bench->add_option("--batch-size", bench.bench.batch_size)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_bench->add_option("--seq-len", bench.seq_len, "Tokens per sequence");
  c_bench->add_option("--reps", bench.bench.reps)
      ->check(CLI::Range(kMinBenchReps, std::size_t{1} << 30))
      ->capture_default_str();
  c_bench->add_option("--warmup", bench.bench.warmup)
      ->check(CLI::Range(kMinBenchWarmup, std::size_t{1} << 30))
      ->capture_default_str();
  c_bench->add_option("--out", bench.out, "Results as JSON lines");
  add_seed(c_bench, bench.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (e.get_name() == "CallForVersion" ? "prunesearch 0.1.0\n"
                                               : app.help());
      return kExitOk;
    }
    print_error(err, kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    if (*c_init) return cmd_init(init, out, err);
    if (*c_gen) return cmd_gen_data(gen, out, err);
    if (*c_train) return cmd_train(train, out, err);
    if (*c_search) return cmd_search(search, out, err);
    if (*c_ft) return cmd_finetune(ft, out, err);
    if (*c_corr) return cmd_correlate(corr, out, err);
    if (*c_sched) return cmd_schedule(sched, out, err);
    if (*c_bench) return cmd_bench(bench, out, err);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    print_error(err, code, e.what());
    return code;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("prunesearch");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace prunesearch
