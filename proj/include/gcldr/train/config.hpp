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
#include <span>
#include <string>
#include <vector>

#include "gcldr/autodiff/optimizer.hpp"
#include "gcldr/model/bundle.hpp"

namespace gcldr::train {

enum class Variant { full, direct, single_space, feature_based, class_confuse, no_unification, meta };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
std::vector<Variant> all_variants();

struct LossWeights {
    double cd = 1.0;
    double ci = 1.0;
    double ac = 1.0;
    double d = 1.0;
    double u = 1.0;
};

struct TrainConfig {
    std::size_t k = 2;
    std::size_t batch_size = 512;
    std::size_t epochs = 100;
    double lr = 1e-3;
    ad::OptimizerKind optimizer = ad::OptimizerKind::adam;
    std::uint64_t seed = 0;
    Variant variant = Variant::full;
    double gamma = 0.01;
    double alpha = 1.0;
    LossWeights weights;

    std::size_t p_width = 512;
    std::size_t g_width = 128;
    double p_dropout = 0.5;

    std::size_t patience = 0;  // early stop on validation aAUC; 0 disables
    double val_fraction = 0.1;
    double tau = 0.0;  // 0 selects 1/c
    bool meta_hvp = false;
    bool track_meta_cosine = false;

    void validate() const;
};

struct ClassPrior {
    std::vector<double> p;
};

/// Training-set class frequencies. `c` = 0 infers the class count.
ClassPrior estimate_prior(std::span<const std::size_t> labels, std::size_t c = 0);

/// Sub-networks each variant keeps.
model::BundleLayout layout_for(Variant v);

/// Which terms enter the head phase and the extractor phase.
struct LossWiring {
    bool cd = true;          // cross-entropy of the global cd head
    bool ci = true;          // cross-entropy of the global ci head
    bool ac = true;          // class-prior matching through f_ci
    bool discover_cd = true;
    bool discover_ci = true;
    bool unify = true;       // elimination loss in the extractor phase
    bool discovery_in_extractor_phase = false;
};

LossWiring wiring_for(Variant v);

}  // namespace gcldr::train
