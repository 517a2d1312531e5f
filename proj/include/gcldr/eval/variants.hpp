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

#include "gcldr/autodiff/tensor.hpp"
#include "gcldr/model/bundle.hpp"
#include "gcldr/train/config.hpp"

namespace gcldr::eval {

struct VariantSetup {
    model::ModelBundle bundle;
    train::LossWiring wiring;
};

/// Bundle with the variant's sub-networks, plus which losses it trains on.
///  single_space   - no ci space
///  feature_based  - no local heads; the posterior is the discriminator output
///  class_confuse  - no discriminators or local heads
///  no_unification - cd local heads and D_cd only, trained on discovery alone
///  direct         - P, G_cd and R_g_cd with cross-entropy only
VariantSetup make_variant(const train::TrainConfig& config, std::size_t d, std::size_t c);

/// sum_r p(z=r | f_cd, D_cd) p(y | f_cd, R_l_cd_r) in infer mode.
ad::Tensor predict_no_unification(model::ModelBundle& bundle, const ad::Tensor& x);

/// Routes to predict_no_unification or the global cd head.
ad::Tensor predict_variant(model::ModelBundle& bundle, train::Variant v, const ad::Tensor& x);

}  // namespace gcldr::eval
