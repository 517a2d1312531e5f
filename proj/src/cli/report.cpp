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

#include "gcldr/cli/report.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "gcldr/errors.hpp"

namespace gcldr::cli {

using nlohmann::json;

namespace {

const char* kHistoryColumns[] = {"l_cd", "l_ci", "l_ac", "l_d", "l_u", "l_meta", "meta_cosine", "val_aauc", "val_acc1"};
const char* kMetricNames[] = {"aauc", "afar", "afrr", "abfr", "acc1"};

json history_json(const std::vector<train::HistoryRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"epoch", r.epoch}, {"l_cd", r.l_cd}, {"l_ci", r.l_ci}, {"l_ac", r.l_ac}, {"l_d", r.l_d},
                       {"l_u", r.l_u}, {"l_meta", r.l_meta}, {"meta_cosine", r.meta_cosine},
                       {"val_aauc", r.val_aauc}, {"val_acc1", r.val_acc1}});
    return out;
}

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) return {};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    return {mean, sd};
}

json metrics_json(const eval::MetricsReport& m) {
    json per_class = json::array();
    for (double a : m.per_class_auc) per_class.push_back(std::isnan(a) ? json(nullptr) : json(a));
    return {{"aauc", m.aauc}, {"afar", m.afar},   {"afrr", m.afrr},          {"abfr", m.abfr},
            {"acc1", m.acc1}, {"tau", m.tau},     {"per_class_auc", per_class}, {"excluded", m.excluded}};
}

json report_json(const RunReport& report) {
    json runs = json::array();
    std::map<std::string, std::map<std::string, std::vector<double>>> by_variant;
    for (const auto& r : report.runs) {
        const auto name = train::to_string(r.variant);
        runs.push_back({{"variant", name},
                        {"seed", r.seed},
                        {"metrics", metrics_json(r.test)},
                        {"history", history_json(r.history)},
                        {"wall_clock_s", r.wall_clock_s}});
        auto& agg = by_variant[name];
        agg["aauc"].push_back(r.test.aauc);
        agg["afar"].push_back(r.test.afar);
        agg["afrr"].push_back(r.test.afrr);
        agg["abfr"].push_back(r.test.abfr);
        agg["acc1"].push_back(r.test.acc1);
    }
    json aggregate = json::object();
    for (const auto& [name, metrics] : by_variant) {
        json entry = json::object();
        for (const auto& [metric, values] : metrics) {
            const auto ms = mean_std(values);
            entry[metric] = {{"mean", ms.mean}, {"std", ms.std}, {"n", values.size()}};
        }
        aggregate[name] = entry;
    }
    return {{"schema_version", kReportSchemaVersion},
            {"artifact_version", GCLDR_VERSION},
            {"config_hash", report.config_hash},
            {"config", report.config},
            {"runs", runs},
            {"aggregate", aggregate},
            {"wall_clock_s", report.wall_clock_s}};
}

void validate_report_json(const json& doc) {
    auto need = [](const json& j, const char* key, json::value_t type, const std::string& where) {
        if (!j.contains(key)) throw ConfigError(fmt::format("report: {} lacks '{}'", where, key));
        const auto t = j.at(key).type();
        const bool numeric_ok = type == json::value_t::number_float &&
                                (t == json::value_t::number_integer || t == json::value_t::number_unsigned);
        if (t != type && !numeric_ok &&
            !(type == json::value_t::number_unsigned && t == json::value_t::number_integer))
            throw ConfigError(fmt::format("report: {}.{} has the wrong type", where, key));
    };
    need(doc, "schema_version", json::value_t::number_unsigned, "report");
    if (doc.at("schema_version") != kReportSchemaVersion) throw ConfigError("report: unsupported schema_version");
    need(doc, "artifact_version", json::value_t::string, "report");
    need(doc, "config_hash", json::value_t::string, "report");
    need(doc, "config", json::value_t::object, "report");
    need(doc, "runs", json::value_t::array, "report");
    need(doc, "aggregate", json::value_t::object, "report");
    for (const auto& run : doc.at("runs")) {
        need(run, "variant", json::value_t::string, "run");
        need(run, "seed", json::value_t::number_unsigned, "run");
        need(run, "metrics", json::value_t::object, "run");
        need(run, "history", json::value_t::array, "run");
        for (const char* m : kMetricNames) need(run.at("metrics"), m, json::value_t::number_float, "metrics");
        for (const auto& row : run.at("history")) {
            need(row, "epoch", json::value_t::number_unsigned, "history");
            for (const char* col : kHistoryColumns) need(row, col, json::value_t::number_float, "history");
        }
    }
}

std::string history_csv(const json& doc) {
    std::string out = "variant,seed,epoch";
    for (const char* col : kHistoryColumns) out += fmt::format(",{}", col);
    out += '\n';
    for (const auto& run : doc.at("runs")) {
        for (const auto& row : run.at("history")) {
            out += fmt::format("{},{},{}", run.at("variant").get<std::string>(), run.at("seed").get<std::uint64_t>(),
                               row.at("epoch").get<std::size_t>());
            for (const char* col : kHistoryColumns) out += fmt::format(",{:.17g}", row.at(col).get<double>());
            out += '\n';
        }
    }
    return out;
}

std::string plotdata_csv(const json& doc) {
    std::map<std::string, std::map<std::size_t, std::map<std::string, std::vector<double>>>> acc;
    for (const auto& run : doc.at("runs"))
        for (const auto& row : run.at("history"))
            for (const char* col : kHistoryColumns)
                acc[run.at("variant").get<std::string>()][row.at("epoch").get<std::size_t>()][col].push_back(
                    row.at(col).get<double>());
    std::string out = "variant,epoch";
    for (const char* col : kHistoryColumns) out += fmt::format(",{}", col);
    out += '\n';
    for (const auto& [variant, epochs] : acc)
        for (const auto& [epoch, cols] : epochs) {
            out += fmt::format("{},{}", variant, epoch);
            for (const char* col : kHistoryColumns) out += fmt::format(",{:.17g}", mean_std(cols.at(col)).mean);
            out += '\n';
        }
    return out;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

}  // namespace gcldr::cli
