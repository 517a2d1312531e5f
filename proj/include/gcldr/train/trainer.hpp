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
#include <random>
#include <span>
#include <vector>

#include "gcldr/autodiff/optimizer.hpp"
#include "gcldr/data/dataset.hpp"
#include "gcldr/ldd/ldd.hpp"
#include "gcldr/model/bundle.hpp"
#include "gcldr/train/config.hpp"

namespace gcldr::train {

struct Batch {
    ad::Tensor x;
    std::vector<std::size_t> y;
};

struct StepReport {
    double l_cd = 0.0;
    double l_ci = 0.0;
    double l_ac = 0.0;
    double l_d = 0.0;
    double l_u = 0.0;
    double l_meta = 0.0;
    double meta_cosine = 0.0;  // cosine of the two domain-set gradients when tracked
};

/// One run's mutable state. The main stream drives shuffling and dropout; the
/// meta stream drives domain splits only.
struct TrainState {
    TrainConfig config;
    LossWiring wiring;
    model::ModelBundle bundle;
    ClassPrior prior;
    ad::OptimizerState heads_opt;
    ad::OptimizerState extractors_opt;
    std::mt19937_64 rng;
    std::mt19937_64 meta_rng;
    std::uint64_t step = 0;
};

TrainState init_training(const TrainConfig& config, std::size_t d, const ClassPrior& prior);

/// Head phase on detached features, then extractor phase on a fresh forward.
/// Batchnorm running statistics move only in the extractor phase.
StepReport train_step(TrainState& state, const Batch& batch);

/// Extractor-phase objective at the given live features (no meta term).
ad::Tensor extractor_objective(TrainState& state, const Batch& batch, const model::Features& f, StepReport& report);

struct HistoryRow {
    std::size_t epoch = 0;
    double l_cd = 0.0;
    double l_ci = 0.0;
    double l_ac = 0.0;
    double l_d = 0.0;
    double l_u = 0.0;
    double l_meta = 0.0;
    double meta_cosine = 0.0;
    double val_aauc = 0.0;
    double val_acc1 = 0.0;
};

struct FitResult {
    model::ModelBundle bundle;
    std::vector<HistoryRow> history;
    data::ValidationSplit split;  // indices into the dataset
};

/// Trains on the rows with role train; validation is val_fraction of the test rows.
FitResult fit(const data::GcldrDataset& dataset, const TrainConfig& config);

/// Class probabilities from R_g_cd(G_cd(P(x))) in infer mode.
ad::Tensor predict(model::ModelBundle& bundle, const ad::Tensor& x);

}  // namespace gcldr::train
