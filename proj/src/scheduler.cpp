// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/scheduler.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "prunesearch/errors.hpp"
#include "prunesearch/file_util.hpp"
#include "json.hpp"

namespace prunesearch {

namespace {

using nlohmann::json;

// Absorbs decimal-to-binary noise when totals are given as e.g. 558.4k.
bool within(double used, double total) {
  return used <= total + 1e-9 * std::max(1.0, std::fabs(total));
}

// Decimal rounding that treats binary representations of ties like 17.225
// as the decimal value they were written as.
double round_decimal(double x, int digits) {
  const double scale = std::pow(10.0, digits);
  const double scaled = x * scale;
  return std::round(scaled + std::copysign(1e-9 * std::max(1.0, std::fabs(scaled)), scaled)) /
         scale;
}

Resources resources_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  Resources r;
  auto get = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number())
      throw FormatError(where + "." + key + ": expected a number");
    out = j.at(key).get<double>();
    if (!(out >= 0.0) || !std::isfinite(out))
      throw FormatError(where + "." + key + ": must be finite and >= 0");
  };
  get("dsp", r.dsp);
  get("ff", r.ff);
  get("lut", r.lut);
  get("bram", r.bram);
  return r;
}

void validate_ops(std::span<const OperationProfile> ops) {
  for (const auto& op : ops) {
    if (!(op.base_latency_ms > 0.0) || !std::isfinite(op.base_latency_ms))
      throw ConfigError("operation '" + op.name + "': base latency must be > 0");
    if (op.max_parallelism < 1)
      throw ConfigError("operation '" + op.name +
                        "': max parallelism must be >= 1");
    for (double v : op.unit_resources.as_array())
      if (!(v >= 0.0))
        throw ConfigError("operation '" + op.name + "': negative resources");
  }
}

}  // namespace

Resources& Resources::operator+=(const Resources& o) {
  dsp += o.dsp;
  ff += o.ff;
  lut += o.lut;
  bram += o.bram;
  return *this;
}

Resources operator*(double s, const Resources& r) {
  return {s * r.dsp, s * r.ff, s * r.lut, s * r.bram};
}

bool fits(const Resources& a, const Resources& b) {
  return within(a.dsp, b.dsp) && within(a.ff, b.ff) && within(a.lut, b.lut) &&
         within(a.bram, b.bram);
}

void ResourceBudget::validate() const {
  if (multiplier < 1) throw ConfigError("budget multiplier must be >= 1");
  if (!fits(reserved, total))
    throw ConfigError("reserved resources exceed the budget total");
}

double plan_latency(const SchedulePlan& plan) {
  double total = 0.0;
  for (double l : plan.latency_ms) total += l;
  return total;
}

Resources plan_usage(std::span<const OperationProfile> ops,
                     std::span<const std::size_t> parallelism,
                     const ResourceBudget& budget) {
  if (ops.size() != parallelism.size())
    throw DimensionError("plan has " + std::to_string(parallelism.size()) +
                         " factors for " + std::to_string(ops.size()) + " ops");
  Resources sum;
  for (std::size_t i = 0; i < ops.size(); ++i)
    sum += static_cast<double>(parallelism[i]) * ops[i].unit_resources;
  return static_cast<double>(budget.multiplier) * sum + budget.reserved;
}

Resources utilization(const Resources& used, const Resources& total) {
  const auto u = used.as_array();
  const auto t = total.as_array();
  std::array<double, 4> pct{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (t[i] == 0.0)
      throw DomainError("utilization: total " + std::string(Resources::kNames[i]) +
                        " is zero");
    pct[i] = round_decimal(100.0 * u[i] / t[i], 1);
  }
  return Resources::from_array(pct);
}

Resources utilization(const SchedulePlan& plan, const ResourceBudget& budget) {
  return utilization(plan.usage, budget.total);
}

SchedulePlan make_plan(std::span<const OperationProfile> ops,
                       std::vector<std::size_t> parallelism,
                       const ResourceBudget& budget) {
  SchedulePlan plan;
  plan.usage = plan_usage(ops, parallelism, budget);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (parallelism[i] < 1)
      throw ConfigError("operation '" + ops[i].name + "': parallelism must be >= 1");
    plan.op_names.push_back(ops[i].name);
    plan.latency_ms.push_back(ops[i].base_latency_ms /
                              static_cast<double>(parallelism[i]));
  }
  plan.parallelism = std::move(parallelism);
  plan.total_latency_ms = plan_latency(plan);
  plan.utilization_pct = utilization(plan, budget);
  return plan;
}

SchedulePlan sequential_plan(std::span<const OperationProfile> ops,
                             const ResourceBudget& budget) {
  validate_ops(ops);
  budget.validate();
  return make_plan(ops, std::vector<std::size_t>(ops.size(), 1), budget);
}

SchedulePlan greedy_schedule(std::span<const OperationProfile> ops,
                             const ResourceBudget& budget) {
  validate_ops(ops);
  budget.validate();
  std::vector<std::size_t> par(ops.size(), 1);
  const Resources base = plan_usage(ops, par, budget);
  if (!fits(base, budget.total)) {
    std::string binding;
    const auto u = base.as_array();
    const auto t = budget.total.as_array();
    for (std::size_t i = 0; i < 4; ++i) {
      if (within(u[i], t[i])) continue;
      if (!binding.empty()) binding += ", ";
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s needs %g of %g",
                    std::string(Resources::kNames[i]).c_str(), u[i], t[i]);
      binding += buf;
    }
    throw InfeasibleError("infeasible at parallelism 1: " + binding);
  }

  std::vector<bool> frozen(ops.size(), false);
  std::vector<std::size_t> trace;
  const double m = static_cast<double>(budget.multiplier);
  Resources used = base;
  for (;;) {
    std::size_t slowest = ops.size();
    double worst = -1.0;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (frozen[i]) continue;
      const double lat = ops[i].base_latency_ms / static_cast<double>(par[i]);
      if (lat > worst) {
        worst = lat;
        slowest = i;
      }
    }
    if (slowest == ops.size()) break;
    const Resources grown = used + m * ops[slowest].unit_resources;
    if (par[slowest] < ops[slowest].max_parallelism && fits(grown, budget.total)) {
      ++par[slowest];
      // Recompute rather than accumulate so the check never drifts.
      used = plan_usage(ops, par, budget);
      trace.push_back(slowest);
    } else {
      frozen[slowest] = true;
    }
  }
  SchedulePlan plan = make_plan(ops, std::move(par), budget);
  plan.trace = std::move(trace);
  return plan;
}

ScheduleFixture schedule_fixture_from_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("schedule fixture: ") + e.what(),
                      static_cast<long long>(e.byte));
  }
  try {
    if (!j.is_object() || j.value("format", "") != "prunesearch-schedule")
      throw FormatError("schedule fixture: missing format tag");
    if (j.value("schema_version", 0) != 1)
      throw FormatError("schedule fixture: unsupported schema version");
    ScheduleFixture f;
    const json& b = j.at("budget");
    f.budget.total = resources_from_json(b.at("total"), "budget.total");
    if (b.contains("reserved"))
      f.budget.reserved = resources_from_json(b.at("reserved"), "budget.reserved");
    f.budget.multiplier = b.value("multiplier", std::size_t{1});
    for (const json& o : j.at("operations")) {
      OperationProfile op;
      op.name = o.at("name").get<std::string>();
      op.base_latency_ms = o.at("base_latency_ms").get<double>();
      op.unit_resources = resources_from_json(o.at("unit_resources"),
                                              "operation '" + op.name + "'");
      op.max_parallelism = o.value("max_parallelism", std::size_t{1});
      f.operations.push_back(std::move(op));
    }
    if (j.contains("reported")) {
      const json& r = j.at("reported");
      if (r.contains("encoder"))
        f.reported_encoder = resources_from_json(r.at("encoder"), "reported.encoder");
      if (r.contains("latency_ms"))
        f.reported_latency_ms = r.at("latency_ms").get<double>();
      if (r.contains("utilization_pct"))
        f.reported_utilization_pct =
            resources_from_json(r.at("utilization_pct"), "reported.utilization_pct");
    }
    validate_ops(f.operations);
    f.budget.validate();
    return f;
  } catch (const json::exception& e) {
    throw FormatError(std::string("schedule fixture: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("schedule fixture: ") + e.what());
  }
}

ScheduleFixture read_schedule_fixture(const std::filesystem::path& path) {
  return schedule_fixture_from_text(read_file(path));
}

std::string format_schedule_table(const SchedulePlan& plan,
                                  const ScheduleFixture& fixture) {
  std::ostringstream out;
  char line[256];
  const auto& total = fixture.budget.total;
  std::snprintf(line, sizeof line, "%-34s %10s %12s %12s %8s %6s %12s\n",
                "operation", "DSP", "FF", "LUT", "BRAM", "par", "latency_ms");
  out << line;
  std::snprintf(line, sizeof line, "%-34s %10.0f %12.1f %12.1f %8.0f %6s %12s\n",
                "total hardware resources", total.dsp, total.ff, total.lut,
                total.bram, "", "N/A");
  out << line;
  for (std::size_t i = 0; i < plan.op_names.size(); ++i) {
    const Resources r = static_cast<double>(plan.parallelism[i]) *
                        fixture.operations[i].unit_resources;
    std::snprintf(line, sizeof line,
                  "%-34s %10.0f %12.1f %12.1f %8.0f %6zu %12.3f\n",
                  plan.op_names[i].c_str(), r.dsp, r.ff, r.lut, r.bram,
                  plan.parallelism[i], plan.latency_ms[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-34s %10.0f %12.1f %12.1f %8.0f %6s %12.2f\n",
                "plan usage", plan.usage.dsp, plan.usage.ff, plan.usage.lut,
                plan.usage.bram, "", round_decimal(plan.total_latency_ms, 2));
  out << line;
  const auto& u = plan.utilization_pct;
  std::snprintf(line, sizeof line, "%-34s %9.1f%% %11.1f%% %11.1f%% %7.1f%%\n",
                "plan utilization", u.dsp, u.ff, u.lut, u.bram);
  out << line;
  if (fixture.reported_encoder) {
    const Resources& e = *fixture.reported_encoder;
    std::snprintf(line, sizeof line, "%-34s %10.0f %12.1f %12.1f %8.0f\n",
                  "reported encoder resources", e.dsp, e.ff, e.lut, e.bram);
    out << line;
    // BRAM is not reported per encoder, so its share is left out.
    Resources t = total;
    if (t.bram == 0.0) t.bram = 1.0;
    const Resources eu = utilization(e, t);
    std::snprintf(line, sizeof line, "%-34s %9.1f%% %11.1f%% %11.1f%%\n",
                  "encoder utilization", eu.dsp, eu.ff, eu.lut);
    out << line;
  }
  std::snprintf(line, sizeof line, "total latency: %.2f ms\n",
                round_decimal(plan.total_latency_ms, 2));
  out << line;
  return out.str();
}

}  // namespace prunesearch
