// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunesearch {

/// Hardware resource vector: DSP slices, flip-flops, LUTs, block RAMs.
struct Resources {
  double dsp = 0.0;
  double ff = 0.0;
  double lut = 0.0;
  double bram = 0.0;

  static constexpr std::array<std::string_view, 4> kNames = {"DSP", "FF", "LUT",
                                                             "BRAM"};
  std::array<double, 4> as_array() const { return {dsp, ff, lut, bram}; }
  static Resources from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }

  Resources& operator+=(const Resources& o);
  friend Resources operator+(Resources a, const Resources& b) { return a += b; }
  friend Resources operator*(double s, const Resources& r);
  /// Componentwise a <= b.
  friend bool fits(const Resources& a, const Resources& b);
  friend bool operator==(const Resources&, const Resources&) = default;
};

struct OperationProfile {
  std::string name;
  double base_latency_ms = 0.0;  // at parallelism 1
  Resources unit_resources;      // per parallelism unit
  std::size_t max_parallelism = 1;

  friend bool operator==(const OperationProfile&,
                         const OperationProfile&) = default;
};

struct ResourceBudget {
  Resources total;
  Resources reserved;
  std::size_t multiplier = 1;

  /// ConfigError unless reserved <= total componentwise and multiplier >= 1.
  void validate() const;

  friend bool operator==(const ResourceBudget&, const ResourceBudget&) = default;
};

struct SchedulePlan {
  std::vector<std::string> op_names;
  std::vector<std::size_t> parallelism;
  std::vector<double> latency_ms;
  double total_latency_ms = 0.0;
  /// multiplier * sum(parallelism_i * unit_i) + reserved.
  Resources usage;
  Resources utilization_pct;
  /// Index of the op grown at each greedy step, in order.
  std::vector<std::size_t> trace;

  friend bool operator==(const SchedulePlan&, const SchedulePlan&) = default;
};

/// Sum of base_latency / parallelism over the ops of the plan.
double plan_latency(const SchedulePlan& plan);

/// Resource usage of `parallelism` under the budget's multiplier and reserve.
Resources plan_usage(std::span<const OperationProfile> ops,
                     std::span<const std::size_t> parallelism,
                     const ResourceBudget& budget);

/// Plan at the given parallelism, with latency, usage and utilization filled.
SchedulePlan make_plan(std::span<const OperationProfile> ops,
                       std::vector<std::size_t> parallelism,
                       const ResourceBudget& budget);

/// Every op at parallelism 1.
SchedulePlan sequential_plan(std::span<const OperationProfile> ops,
                             const ResourceBudget& budget);

/// Repeatedly grows the slowest unfrozen op (ties: first in list order) by
/// one unit if the budget still holds, else freezes it. Throws
/// InfeasibleError naming the binding resources when parallelism 1 already
/// exceeds the budget.
SchedulePlan greedy_schedule(std::span<const OperationProfile> ops,
                             const ResourceBudget& budget);

/// 100 * used / total per resource, rounded to one decimal. Throws
/// DomainError when a total is zero.
Resources utilization(const Resources& used, const Resources& total);
Resources utilization(const SchedulePlan& plan, const ResourceBudget& budget);

/// Operations, budget and optional published reference values.
struct ScheduleFixture {
  std::vector<OperationProfile> operations;
  ResourceBudget budget;
  /// Resources of one encoder as reported alongside the per-op rows.
  std::optional<Resources> reported_encoder;
  std::optional<double> reported_latency_ms;
  std::optional<Resources> reported_utilization_pct;
};

ScheduleFixture schedule_fixture_from_text(std::string_view text);
ScheduleFixture read_schedule_fixture(const std::filesystem::path& path);

/// Table with one row per op plus totals and utilization.
std::string format_schedule_table(const SchedulePlan& plan,
                                  const ScheduleFixture& fixture);

}  // namespace prunesearch
