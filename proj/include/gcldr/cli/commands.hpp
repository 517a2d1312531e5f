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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gcldr/cli/config.hpp"
#include "gcldr/cli/report.hpp"
#include "gcldr/meta/meta.hpp"

namespace gcldr::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDivergence = 3, kAcceptanceFailure = 4 };

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<train::Variant> variant;
    std::size_t workers = 1;
    std::filesystem::path out = "out";
};

/// Applies --seed and --variant to the config.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const Overrides& ov);

struct RunOutcome {
    RunRecord record;
    model::ModelBundle bundle;
};

RunOutcome run_one(const ExperimentConfig& cfg, train::Variant variant, std::uint64_t seed);

/// Runs every (variant, seed) pair on `workers` threads. Results keep the
/// (variant, seed) order and do not depend on the worker count. When
/// `checkpoint_dir` is set each trained bundle is saved there.
RunReport run_experiment(const ExperimentConfig& cfg, std::size_t workers,
                         const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

std::string checkpoint_name(train::Variant v, std::uint64_t seed);

struct GradcheckRow {
    std::string name;
    std::size_t seeds = 0;
    double max_rel_error = 0.0;
    double min_rel_error = 0.0;   // over seeds
    bool expect_failure = false;  // fault-injection rows pass when every seed fails the check
    bool pass = false;
};

/// Tiny model (d=8, P width 16, G width 8, c=3, k=2, b=4); every loss and both
/// phase objectives against central differences.
std::vector<GradcheckRow> gradcheck_suite(std::size_t seeds, double tol = 1e-4, double eps = 1e-5);

std::vector<meta::TaylorRow> taylor_for_seed(const ExperimentConfig& cfg, std::uint64_t seed);

int cmd_generate(const ExperimentConfig& cfg, const Overrides& ov);
int cmd_train(const ExperimentConfig& cfg, const Overrides& ov);
int cmd_evaluate(const ExperimentConfig& cfg, const Overrides& ov);
int cmd_gradcheck(const ExperimentConfig& cfg, const Overrides& ov);
int cmd_taylor(const ExperimentConfig& cfg, const Overrides& ov);
/// format: csv | json | plotdata. Reads <out>/report.json unless `report` is given.
int cmd_export(const Overrides& ov, const std::string& format, const std::optional<std::filesystem::path>& report);

}  // namespace gcldr::cli
