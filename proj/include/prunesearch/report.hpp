// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "prunesearch/finetune.hpp"
#include "prunesearch/scheduler.hpp"
#include "prunesearch/search.hpp"

namespace prunesearch {

// Reports are JSON documents tagged with "format": "prunesearch-report", a
// "kind" and a "schema_version". Reals are written with round-trip
// precision, so every reader returns a value equal to what was written.
inline constexpr int kReportSchemaVersion = 1;

/// Throws ConfigError for a report with no candidates or an out-of-range
/// best index.
std::string report_to_text(const SearchReport& report);
std::string report_to_text(const TrainLog& log);
std::string report_to_text(const SchedulePlan& plan);
std::string report_to_text(const CorrelationResult& result);

/// Throws FormatError on malformed input, a kind mismatch or an unknown
/// schema version.
SearchReport search_report_from_text(std::string_view text);
TrainLog train_log_from_text(std::string_view text);
SchedulePlan schedule_plan_from_text(std::string_view text);
CorrelationResult correlation_from_text(std::string_view text);

template <typename T>
void write_report(const T& report, const std::filesystem::path& path);

SearchReport read_search_report(const std::filesystem::path& path);
TrainLog read_train_log(const std::filesystem::path& path);
SchedulePlan read_schedule_plan(const std::filesystem::path& path);

}  // namespace prunesearch
