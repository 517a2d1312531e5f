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

#include "gcldr/eval/variants.hpp"

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/errors.hpp"
#include "gcldr/train/trainer.hpp"

namespace gcldr::eval {

using ad::Tensor;

VariantSetup make_variant(const train::TrainConfig& config, std::size_t d, std::size_t c) {
    config.validate();
    const model::BundleDims dims{d, c, config.k, config.p_width, config.g_width, config.p_dropout};
    return {model::build_bundle(dims, config.seed, train::layout_for(config.variant)), train::wiring_for(config.variant)};
}

Tensor predict_no_unification(model::ModelBundle& bundle, const Tensor& x) {
    if (bundle.R_g_cd || !bundle.D_cd || bundle.R_l_cd.empty())
        throw ContractError("predict_no_unification: bundle is not a no-unification variant");
    ad::NoGradGuard no_grad;
    const model::Features f = model::forward_features(bundle, x);
    const Tensor disc = model::head_forward(*bundle.D_cd, f.cd);
    Tensor mix;
    for (std::size_t r = 0; r < bundle.R_l_cd.size(); ++r) {
        const Tensor w = ad::column(disc, r);
        const Tensor head = model::head_forward(bundle.R_l_cd[r], f.cd);
        const std::size_t b = head.rows(), cc = head.cols();
        std::vector<double> term(b * cc);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < cc; ++j) term[i * cc + j] = w.values()[i] * head.values()[i * cc + j];
        const Tensor t = Tensor::from({b, cc}, std::move(term));
        mix = mix.defined() ? ad::add(mix, t) : t;
    }
    return mix;
}

Tensor predict_variant(model::ModelBundle& bundle, train::Variant v, const Tensor& x) {
    if (v == train::Variant::no_unification) return predict_no_unification(bundle, x);
    return train::predict(bundle, x);
}

}  // namespace gcldr::eval
