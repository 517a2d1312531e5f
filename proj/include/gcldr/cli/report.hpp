// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcldr/eval/metrics.hpp"
#include "gcldr/train/config.hpp"
#include "gcldr/train/trainer.hpp"

namespace gcldr::cli {

inline constexpr int kReportSchemaVersion = 1;

struct RunRecord {
    train::Variant variant = train::Variant::full;
    std::uint64_t seed = 0;
    eval::MetricsReport test;
    std::vector<train::HistoryRow> history;
    double wall_clock_s = 0.0;
};

struct RunReport {
    nlohmann::json config;
    std::string config_hash;
    std::vector<RunRecord> runs;
    double wall_clock_s = 0.0;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single run
};

MeanStd mean_std(const std::vector<double>& values);

nlohmann::json metrics_json(const eval::MetricsReport& m);
nlohmann::json report_json(const RunReport& report);

/// Throws ConfigError when `doc` lacks a required field or has the wrong schema version.
void validate_report_json(const nlohmann::json& doc);

/// One row per (run, epoch).
std::string history_csv(const nlohmann::json& doc);
/// Per variant and epoch, the mean over seeds of every history column.
std::string plotdata_csv(const nlohmann::json& doc);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gcldr::cli
