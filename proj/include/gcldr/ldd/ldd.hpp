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
#include <span>
#include <vector>

#include "gcldr/autodiff/tensor.hpp"
#include "gcldr/model/bundle.hpp"

namespace gcldr::ldd {

/// k local heads and one discriminator over one feature space. An empty
/// `local` list means every local likelihood is 1, so the posterior reduces to
/// the discriminator output.
struct LddHeads {
    std::vector<model::Network*> local;
    model::Network* discriminator = nullptr;
    model::Space space = model::Space::cd;
    std::size_t k = 2;
};

LddHeads ldd_heads(model::ModelBundle& bundle, model::Space space);

struct PosteriorMatrix {
    std::size_t b = 0;
    std::size_t k = 0;
    std::vector<double> rho;  // b x k, row-major
    model::Space space = model::Space::cd;

    double operator()(std::size_t i, std::size_t r) const { return rho[i * k + r]; }
    ad::Tensor tensor() const;  // constant b x k tensor
};

/// Entry (i, r): probability that local head r assigns to the label of row i.
ad::Tensor local_likelihood(const LddHeads& heads, const ad::Tensor& f, std::span<const std::size_t> y);

/// rho = softmax(log D + log L) per row, logs floored at 1e-12. Differentiable.
ad::Tensor posterior_tensor(const LddHeads& heads, const ad::Tensor& f, std::span<const std::size_t> y);

/// Bayes combination of raw discriminator outputs and likelihoods (both b x k)
/// in log space with per-row max subtraction.
PosteriorMatrix posteriors_from(std::span<const double> disc, std::span<const double> lik, std::size_t b,
                                std::size_t k, model::Space space = model::Space::cd);

/// E-step. The result carries no gradient.
PosteriorMatrix compute_posteriors(const LddHeads& heads, const ad::Tensor& f, std::span<const std::size_t> y);

/// -(1/b) sum_i sum_r rho_ir [log L_ir + log D_ir], rho held constant.
ad::Tensor discovery_loss(const LddHeads& heads, const ad::Tensor& f, std::span<const std::size_t> y,
                          const PosteriorMatrix& rho);

/// Negative conditional expectation of the complete log-likelihood over b,
/// evaluated by explicit triple summation over (i, r, j).
double q_function(const PosteriorMatrix& rho_prime, const LddHeads& heads, const ad::Tensor& f,
                  std::span<const std::size_t> y);

/// (1/b) sum_i sum_r (rho_ir(f) - 1/k)^2 with rho recomputed from f.
ad::Tensor elimination_loss(const LddHeads& heads, const ad::Tensor& f, std::span<const std::size_t> y);

/// -(1/b) sum_i rho_ir log L_ir for one domain r.
ad::Tensor soft_domain_loss(const LddHeads& heads, const ad::Tensor& f, std::span<const std::size_t> y,
                            const PosteriorMatrix& rho, std::size_t r);

}  // namespace gcldr::ldd
