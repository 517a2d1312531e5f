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
#include <string>
#include <vector>

#include "json.hpp"

#include "gcldr/data/dataset.hpp"
#include "gcldr/train/config.hpp"

namespace gcldr::cli {

struct DatasetSection {
    std::string split = "two_sets";  // two_sets | diagonal3 | mobile_os | custom
    std::size_t classes = 6;
    std::size_t per_set = 2;          // diagonal3 only
    std::string class_sets;           // custom: "0 1 2; 3 4 5"
    std::string cells;                // custom: "train test; test train"
    std::size_t d = 20;
    std::size_t per_combo = 200;
    double sigma = 0.3;
    data::NuisanceKind nuisance = data::NuisanceKind::additive_offset;
    double magnitude = 2.0;
    std::uint64_t seed = 0;           // the run seed is added per run
};

struct EvaluationSection {
    double tau = 0.0;  // 0 selects 1/c
    std::vector<std::uint64_t> seeds{0};
    std::size_t repeat = 1;
    std::vector<train::Variant> variants;  // empty: training.variant
};

struct TaylorSection {
    std::vector<double> alphas{1e-1, 1e-2, 1e-3};
    std::size_t batch = 64;
    double min_decay = 50.0;
};

struct ExperimentConfig {
    DatasetSection dataset;
    train::TrainConfig training;  // carries the model section too
    EvaluationSection evaluation;
    TaylorSection taylor;

    /// Seeds after applying `repeat`: seed + r * 1000003 for r < repeat.
    std::vector<std::uint64_t> run_seeds() const;
    std::vector<train::Variant> run_variants() const;
    data::SplitSpec split_spec() const;
    data::NuisanceSpec nuisance_spec() const;
    data::GenerateParams generate_params() const;
    data::GcldrDataset make_dataset(std::uint64_t run_seed) const;

    void validate() const;
    nlohmann::json to_json() const;
    std::string hash() const;  // FNV-1a of the canonical JSON
};

/// Sections [dataset], [model], [training], [evaluation], [taylor]; unknown
/// sections or keys are rejected.
ExperimentConfig parse_config(const std::string& ini_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace gcldr::cli
