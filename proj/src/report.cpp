// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/report.hpp"

#include "json.hpp"

#include "prunesearch/errors.hpp"
#include "prunesearch/file_util.hpp"

namespace prunesearch {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "prunesearch-report";

json header(const char* kind) {
  return {{"format", kFormat}, {"schema_version", kReportSchemaVersion},
          {"kind", kind}};
}

json parse_document(std::string_view text, const char* kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("report: ") + e.what(),
                      static_cast<long long>(e.byte));
  }
  if (!j.is_object() || !j.contains("format") || j["format"] != kFormat)
    throw FormatError("report: not a prunesearch report");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    throw FormatError("report: missing schema_version");
  const int version = j["schema_version"].get<int>();
  if (version != kReportSchemaVersion)
    throw FormatError("report: unknown schema version " + std::to_string(version));
  if (j.value("kind", "") != kind)
    throw FormatError("report: expected kind '" + std::string(kind) + "', got '" +
                      j.value("kind", "") + "'");
  return j;
}

// Wraps json access errors so callers see a single error type.
template <typename F>
auto decode(const char* what, F&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: bad ") + what + ": " + e.what());
  }
}

json resources_json(const Resources& r) {
  return {{"dsp", r.dsp}, {"ff", r.ff}, {"lut", r.lut}, {"bram", r.bram}};
}

Resources resources_of(const json& j) {
  return {j.at("dsp").get<double>(), j.at("ff").get<double>(),
          j.at("lut").get<double>(), j.at("bram").get<double>()};
}

json log_json(const TrainLog& log) {
  return {{"epoch_loss", log.epoch_loss},
          {"epoch_score", log.epoch_score},
          {"final_score", log.final_score},
          {"wall_time_s", log.wall_time_s},
          {"initial_distill_loss", log.initial_distill_loss}};
}

TrainLog log_of(const json& j) {
  TrainLog log;
  log.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  log.epoch_score = j.at("epoch_score").get<std::vector<double>>();
  log.final_score = j.at("final_score").get<double>();
  log.wall_time_s = j.at("wall_time_s").get<double>();
  log.initial_distill_loss = j.at("initial_distill_loss").get<double>();
  return log;
}

json plan_json(const SchedulePlan& p) {
  return {{"op_names", p.op_names},
          {"parallelism", p.parallelism},
          {"latency_ms", p.latency_ms},
          {"total_latency_ms", p.total_latency_ms},
          {"usage", resources_json(p.usage)},
          {"utilization_pct", resources_json(p.utilization_pct)},
          {"trace", p.trace}};
}

SchedulePlan plan_of(const json& j) {
  SchedulePlan p;
  p.op_names = j.at("op_names").get<std::vector<std::string>>();
  p.parallelism = j.at("parallelism").get<std::vector<std::size_t>>();
  p.latency_ms = j.at("latency_ms").get<std::vector<double>>();
  p.total_latency_ms = j.at("total_latency_ms").get<double>();
  p.usage = resources_of(j.at("usage"));
  p.utilization_pct = resources_of(j.at("utilization_pct"));
  p.trace = j.at("trace").get<std::vector<std::size_t>>();
  if (p.parallelism.size() != p.op_names.size() ||
      p.latency_ms.size() != p.op_names.size())
    throw FormatError("report: schedule columns have different lengths");
  return p;
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_of(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string report_to_text(const SearchReport& report) {
  if (report.candidates.empty())
    throw ConfigError("refusing to write a search report with no candidates");
  if (report.best_index >= report.candidates.size())
    throw ConfigError("best index " + std::to_string(report.best_index) +
                      " out of range");
  json j = header("search");
  const SearchConfig& c = report.config;
  j["config"] = {{"target_overall", c.target_overall},
                 {"num_candidates", c.num_candidates},
                 {"seed", c.seed},
                 {"beta_min", optional_json(c.beta_min)},
                 {"beta_max", optional_json(c.beta_max)},
                 {"metric", std::string(to_string(c.metric))},
                 {"eval_split", c.eval_split},
                 {"num_workers", c.num_workers}};
  json cands = json::array();
  for (const auto& r : report.candidates) {
    cands.push_back({{"strategy_id", r.strategy.strategy_id},
                     {"seed", r.strategy.seed},
                     {"target_overall", r.strategy.target_overall},
                     {"per_layer_ratios", r.strategy.per_layer_ratios},
                     {"pre_finetune_score", r.pre_finetune_score},
                     {"post_finetune_score", optional_json(r.post_finetune_score)},
                     {"eval_wall_time_s", r.eval_wall_time_s}});
  }
  j["candidates"] = std::move(cands);
  j["best_index"] = report.best_index;
  j["seed"] = report.seed;
  j["code_version"] = report.code_version;
  json runs = json::array();
  for (const auto& run : report.finetune_runs)
    runs.push_back({{"candidate_index", run.candidate_index},
                    {"kd", run.kd},
                    {"log", log_json(run.log)}});
  j["finetune_runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

SearchReport search_report_from_text(std::string_view text) {
  const json j = parse_document(text, "search");
  SearchReport r = decode("search report", [&] {
    SearchReport out;
    const json& c = j.at("config");
    out.config.target_overall = c.at("target_overall").get<double>();
    out.config.num_candidates = c.at("num_candidates").get<std::size_t>();
    out.config.seed = c.at("seed").get<std::uint64_t>();
    out.config.beta_min = optional_of(c.at("beta_min"));
    out.config.beta_max = optional_of(c.at("beta_max"));
    try {
      out.config.metric = parse_metric_kind(c.at("metric").get<std::string>());
    } catch (const ConfigError& e) {
      throw FormatError(std::string("report: ") + e.what());
    }
    out.config.eval_split = c.at("eval_split").get<std::string>();
    out.config.num_workers = c.at("num_workers").get<std::size_t>();
    for (const json& e : j.at("candidates")) {
      CandidateRecord rec;
      rec.strategy.strategy_id = e.at("strategy_id").get<std::uint64_t>();
      rec.strategy.seed = e.at("seed").get<std::uint64_t>();
      rec.strategy.target_overall = e.at("target_overall").get<double>();
      rec.strategy.per_layer_ratios =
          e.at("per_layer_ratios").get<std::vector<double>>();
      rec.pre_finetune_score = e.at("pre_finetune_score").get<double>();
      rec.post_finetune_score = optional_of(e.at("post_finetune_score"));
      rec.eval_wall_time_s = e.at("eval_wall_time_s").get<double>();
      out.candidates.push_back(std::move(rec));
    }
    out.best_index = j.at("best_index").get<std::size_t>();
    out.seed = j.at("seed").get<std::uint64_t>();
    out.code_version = j.at("code_version").get<std::string>();
    for (const json& e : j.at("finetune_runs"))
      out.finetune_runs.push_back({e.at("candidate_index").get<std::size_t>(),
                                   e.at("kd").get<bool>(), log_of(e.at("log"))});
    return out;
  });
  if (r.candidates.empty()) throw FormatError("report: no candidates");
  if (r.best_index >= r.candidates.size())
    throw FormatError("report: best index out of range");
  for (const auto& run : r.finetune_runs)
    if (run.candidate_index >= r.candidates.size())
      throw FormatError("report: fine-tune run names a missing candidate");
  return r;
}

std::string report_to_text(const TrainLog& log) {
  json j = header("train_log");
  j["log"] = log_json(log);
  return j.dump(2) + "\n";
}

TrainLog train_log_from_text(std::string_view text) {
  const json j = parse_document(text, "train_log");
  return decode("train log", [&] { return log_of(j.at("log")); });
}

std::string report_to_text(const SchedulePlan& plan) {
  json j = header("schedule");
  j["plan"] = plan_json(plan);
  return j.dump(2) + "\n";
}

SchedulePlan schedule_plan_from_text(std::string_view text) {
  const json j = parse_document(text, "schedule");
  return decode("schedule plan", [&] { return plan_of(j.at("plan")); });
}

std::string report_to_text(const CorrelationResult& result) {
  json j = header("correlation");
  j["pre_scores"] = result.pre_scores;
  j["post_scores"] = result.post_scores;
  j["pearson_r"] = result.pearson_r;
  j["spearman_rho"] = result.spearman_rho;
  return j.dump(2) + "\n";
}

CorrelationResult correlation_from_text(std::string_view text) {
  const json j = parse_document(text, "correlation");
  return decode("correlation", [&] {
    CorrelationResult r;
    r.pre_scores = j.at("pre_scores").get<std::vector<double>>();
    r.post_scores = j.at("post_scores").get<std::vector<double>>();
    r.pearson_r = j.at("pearson_r").get<double>();
    r.spearman_rho = j.at("spearman_rho").get<double>();
    return r;
  });
}

template <typename T>
void write_report(const T& report, const std::filesystem::path& path) {
  write_file_atomic(path, report_to_text(report));
}

template void write_report(const SearchReport&, const std::filesystem::path&);
template void write_report(const TrainLog&, const std::filesystem::path&);
template void write_report(const SchedulePlan&, const std::filesystem::path&);
template void write_report(const CorrelationResult&, const std::filesystem::path&);

SearchReport read_search_report(const std::filesystem::path& path) {
  return search_report_from_text(read_file(path));
}

TrainLog read_train_log(const std::filesystem::path& path) {
  return train_log_from_text(read_file(path));
}

SchedulePlan read_schedule_plan(const std::filesystem::path& path) {
  return schedule_plan_from_text(read_file(path));
}

}  // namespace prunesearch
