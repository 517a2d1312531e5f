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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gcldr/cli/commands.hpp"
#include "gcldr/errors.hpp"

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("gcldr");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* level = std::getenv("GCLDR_LOG")) spdlog::cfg::helpers::load_levels(level);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace gcldr;
    setup_logging();

    CLI::App app{"Cross-latent-domain recognition toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string variant;
    cli::Overrides ov;
    std::string out = "out";
    std::string format = "json";
    std::string report;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "experiment INI file");
        if (needs_config) opt->required();
        sub->add_option("--seed", seed, "run a single seed");
        sub->add_option("--variant", variant, "full, direct, single_space, feature_based, class_confuse, "
                                              "no_unification or meta");
        sub->add_option("--workers", ov.workers, "parallel runs")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory");
    };
    auto* gen = app.add_subcommand("generate", "write dataset CSVs");
    auto* trn = app.add_subcommand("train", "train every variant and seed, write report.json");
    auto* evl = app.add_subcommand("evaluate", "score saved checkpoints on the test split");
    auto* grd = app.add_subcommand("gradcheck", "finite-difference check of every loss");
    auto* tay = app.add_subcommand("taylor", "meta objective versus its first-order expansion");
    auto* exp = app.add_subcommand("export", "convert a report to csv, json or plotdata");
    for (auto* sub : {gen, trn, evl, tay}) add_common(sub, true);
    add_common(grd, false);
    add_common(exp, false);
    exp->add_option("--format", format, "csv, json or plotdata");
    exp->add_option("--report", report, "report.json to read (default <out>/report.json)");

    CLI11_PARSE(app, argc, argv);

    try {
        ov.out = out;
        ov.seed = seed;
        if (!variant.empty()) ov.variant = train::parse_variant(variant);
        if (exp->parsed())
            return cli::cmd_export(ov, format, report.empty() ? std::nullopt
                                                              : std::optional<std::filesystem::path>(report));
        cli::ExperimentConfig cfg = config_path.empty() ? cli::ExperimentConfig{} : cli::load_config(config_path);
        cfg = cli::apply_overrides(cfg, ov);
        if (gen->parsed()) return cli::cmd_generate(cfg, ov);
        if (trn->parsed()) return cli::cmd_train(cfg, ov);
        if (evl->parsed()) return cli::cmd_evaluate(cfg, ov);
        if (grd->parsed()) return cli::cmd_gradcheck(cfg, ov);
        if (tay->parsed()) return cli::cmd_taylor(cfg, ov);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return cli::kConfigError;
    } catch (const ParseError& e) {
        spdlog::error("{}", e.what());
        return cli::kConfigError;
    } catch (const DivergenceError& e) {
        spdlog::error("divergence: {}", e.what());
        return cli::kDivergence;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
