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

#include "gcldr/ldd/ldd.hpp"

#include <algorithm>
#include <cmath>

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/errors.hpp"

namespace gcldr::ldd {

using ad::Tensor;

LddHeads ldd_heads(model::ModelBundle& bundle, model::Space space) {
    auto& disc = bundle.discriminator(space);
    if (!disc) throw ContractError("ldd: bundle has no discriminator for this space");
    LddHeads h;
    h.space = space;
    h.k = bundle.dims.k;
    h.discriminator = &*disc;
    for (auto& net : bundle.local_heads(space)) h.local.push_back(&net);
    if (!h.local.empty() && h.local.size() != h.k) throw ContractError("ldd: expected exactly k local heads");
    return h;
}

Tensor PosteriorMatrix::tensor() const { return Tensor::from({b, k}, rho); }

Tensor local_likelihood(const LddHeads& heads, const Tensor& f, std::span<const std::size_t> y) {
    if (f.rank() != 2 || f.rows() != y.size()) throw DimensionError("local_likelihood: labels do not match batch");
    if (heads.local.empty()) return Tensor::from({f.rows(), heads.k}, std::vector<double>(f.rows() * heads.k, 1.0));
    std::vector<Tensor> cols;
    cols.reserve(heads.local.size());
    for (auto* head : heads.local) cols.push_back(ad::gather_cols(model::head_forward(*head, f), y));
    return ad::concat_cols(cols);
}

Tensor posterior_tensor(const LddHeads& heads, const Tensor& f, std::span<const std::size_t> y) {
    const Tensor d = model::head_forward(*heads.discriminator, f);
    if (heads.local.empty()) return d;
    const Tensor logits = ad::add(ad::log_floored(d), ad::log_floored(local_likelihood(heads, f, y)));
    return ad::softmax_rows(logits);
}

PosteriorMatrix posteriors_from(std::span<const double> disc, std::span<const double> lik, std::size_t b,
                                std::size_t k, model::Space space) {
    if (disc.size() != b * k || lik.size() != b * k) throw DimensionError("posteriors: expected b x k inputs");
    PosteriorMatrix out{b, k, std::vector<double>(b * k), space};
    std::vector<double> logit(k);
    for (std::size_t i = 0; i < b; ++i) {
        double mx = -INFINITY;
        for (std::size_t r = 0; r < k; ++r) {
            const double dv = disc[i * k + r], lv = lik[i * k + r];
            if (!std::isfinite(dv) || !std::isfinite(lv) || dv < 0.0 || lv < 0.0)
                throw DegeneratePosteriorError("posteriors: invalid probability in row " + std::to_string(i));
            logit[r] = std::log(std::max(dv, ad::kLogFloor)) + std::log(std::max(lv, ad::kLogFloor));
            mx = std::max(mx, logit[r]);
        }
        double z = 0.0;
        for (std::size_t r = 0; r < k; ++r) z += (logit[r] = std::exp(logit[r] - mx));
        if (!(z > 0.0) || !std::isfinite(z))
            throw DegeneratePosteriorError("posteriors: row " + std::to_string(i) + " has no mass");
        for (std::size_t r = 0; r < k; ++r) out.rho[i * k + r] = logit[r] / z;
    }
    return out;
}

PosteriorMatrix compute_posteriors(const LddHeads& heads, const Tensor& f, std::span<const std::size_t> y) {
    ad::NoGradGuard no_grad;
    const Tensor d = model::head_forward(*heads.discriminator, f);
    const Tensor l = local_likelihood(heads, f, y);
    return posteriors_from(d.values(), l.values(), f.rows(), heads.k, heads.space);
}

Tensor discovery_loss(const LddHeads& heads, const Tensor& f, std::span<const std::size_t> y,
                      const PosteriorMatrix& rho) {
    if (rho.b != f.rows() || rho.k != heads.k) throw DimensionError("discovery_loss: posterior shape mismatch");
    const Tensor w = rho.tensor();
    Tensor logs = ad::log_floored(model::head_forward(*heads.discriminator, f));
    if (!heads.local.empty()) logs = ad::add(logs, ad::log_floored(local_likelihood(heads, f, y)));
    return ad::scale(ad::sum(ad::mul(w, logs)), -1.0 / static_cast<double>(rho.b));
}

double q_function(const PosteriorMatrix& rho_prime, const LddHeads& heads, const Tensor& f,
                  std::span<const std::size_t> y) {
    ad::NoGradGuard no_grad;
    const std::size_t b = f.rows(), k = heads.k;
    const Tensor disc = model::head_forward(*heads.discriminator, f);
    std::vector<Tensor> local;
    for (auto* head : heads.local) local.push_back(model::head_forward(*head, f));
    const std::size_t c = local.empty() ? 1 : local.front().cols();
    double complete = 0.0;
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t j = 0; j < c; ++j) {
                const bool hit = local.empty() || y[i] == j;
                if (!hit) continue;
                const double pz = std::max(disc.at(i, r), ad::kLogFloor);
                const double py = local.empty() ? 1.0 : std::max(local[r].at(i, j), ad::kLogFloor);
                complete += rho_prime(i, r) * (std::log(pz) + std::log(py));
            }
    return -complete / static_cast<double>(b);
}

Tensor elimination_loss(const LddHeads& heads, const Tensor& f, std::span<const std::size_t> y) {
    const Tensor rho = posterior_tensor(heads, f, y);
    const Tensor dev = ad::add_scalar(rho, -1.0 / static_cast<double>(heads.k));
    return ad::scale(ad::sum(ad::square(dev)), 1.0 / static_cast<double>(f.rows()));
}

Tensor soft_domain_loss(const LddHeads& heads, const Tensor& f, std::span<const std::size_t> y,
                        const PosteriorMatrix& rho, std::size_t r) {
    if (r >= heads.k) throw ContractError("soft_domain_loss: domain index out of range");
    if (heads.local.empty()) throw ContractError("soft_domain_loss: no local heads in this space");
    const Tensor lik = ad::gather_cols(model::head_forward(*heads.local[r], f), y);
    std::vector<double> w(rho.b);
    for (std::size_t i = 0; i < rho.b; ++i) w[i] = rho(i, r);
    const Tensor wt = Tensor::from({rho.b, 1}, std::move(w));
    return ad::scale(ad::sum(ad::mul(wt, ad::log_floored(lik))), -1.0 / static_cast<double>(rho.b));
}

}  // namespace gcldr::ldd
