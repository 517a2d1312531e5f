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

#include "gcldr/train/losses.hpp"

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/errors.hpp"

namespace gcldr::train {

using ad::Tensor;

namespace {

model::Network& require(std::optional<model::Network>& net, const char* what) {
    if (!net) throw ContractError(std::string("bundle has no ") + what);
    return *net;
}

Tensor add_or_init(const Tensor& acc, const Tensor& term) { return acc.defined() ? ad::add(acc, term) : term; }

}  // namespace

Tensor loss_cd(model::ModelBundle& bundle, const Tensor& f_cd, std::span<const std::size_t> y) {
    return ad::cross_entropy(model::head_forward(require(bundle.R_g_cd, "R_g_cd"), f_cd), y);
}

Tensor loss_ci(model::ModelBundle& bundle, const Tensor& f_ci, std::span<const std::size_t> y) {
    return ad::cross_entropy(model::head_forward(require(bundle.R_g_ci, "R_g_ci"), f_ci.detach()), y);
}

Tensor loss_ac(model::ModelBundle& bundle, const Tensor& f_ci, const ClassPrior& prior) {
    const Tensor p = model::head_forward(require(bundle.R_g_ci, "R_g_ci"), f_ci);
    const std::size_t b = p.rows(), c = p.cols();
    if (prior.p.size() != c) throw DimensionError("loss_ac: prior has the wrong number of classes");
    std::vector<double> tiled(b * c);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < c; ++j) tiled[i * c + j] = prior.p[j];
    const Tensor dev = ad::sub(p, Tensor::from({b, c}, std::move(tiled)));
    return ad::scale(ad::sum(ad::square(dev)), 1.0 / static_cast<double>(b * c));
}

Tensor loss_d(model::ModelBundle& bundle, const Tensor& f_cd, const Tensor& f_ci, std::span<const std::size_t> y,
              const ldd::PosteriorMatrix* rho_cd, const ldd::PosteriorMatrix* rho_ci) {
    Tensor total;
    if (rho_cd) total = ldd::discovery_loss(ldd::ldd_heads(bundle, model::Space::cd), f_cd, y, *rho_cd);
    if (rho_ci)
        total = add_or_init(total, ldd::discovery_loss(ldd::ldd_heads(bundle, model::Space::ci), f_ci, y, *rho_ci));
    if (!total.defined()) throw ContractError("loss_d: no space to discover in");
    return total;
}

Tensor loss_u(model::ModelBundle& bundle, const Tensor& f_cd, const Tensor& f_ci, std::span<const std::size_t> y) {
    Tensor total;
    if (bundle.D_cd && f_cd.defined())
        total = ldd::elimination_loss(ldd::ldd_heads(bundle, model::Space::cd), f_cd, y);
    if (bundle.D_ci && f_ci.defined())
        total = add_or_init(total, ldd::elimination_loss(ldd::ldd_heads(bundle, model::Space::ci), f_ci, y));
    if (!total.defined()) throw ContractError("loss_u: no space to unify");
    return total;
}

}  // namespace gcldr::train
