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
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gcldr/autodiff/tensor.hpp"
#include "gcldr/ldd/ldd.hpp"
#include "gcldr/model/bundle.hpp"

namespace gcldr::meta {

struct DomainSplit {
    std::vector<std::size_t> s1;
    std::vector<std::size_t> s2;
};

/// Uniform over nonempty bipartitions of {0..k-1}.
DomainSplit split_domains(std::size_t k, std::mt19937_64& rng);

/// Everything the per-domain losses need besides the parameters. Posteriors
/// stay fixed; each forward replays `masks` so every evaluation sees the same
/// dropout pattern.
struct MetaBatch {
    ad::Tensor x;
    std::vector<std::size_t> y;
    ldd::PosteriorMatrix rho_cd;
    std::optional<ldd::PosteriorMatrix> rho_ci;
    std::mt19937_64 masks;
    bool dropout = true;
};

using Flat = std::vector<double>;

/// L_s(r) = soft loss of domain r in the cd space plus the ci space.
ad::Tensor merged_soft_loss(model::ModelBundle& bundle, const MetaBatch& batch, std::size_t r);

/// Mean of L_s(r) over r in `set`.
ad::Tensor set_loss(model::ModelBundle& bundle, const MetaBatch& batch, std::span<const std::size_t> set);

struct MetaGradients {
    Flat g1;
    Flat g2;
};

/// Gradients of the S1 and S2 mean losses over the extractor group, flattened
/// in select_group order.
MetaGradients meta_gradients(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split);

double dot(const Flat& a, const Flat& b);
double cosine(const Flat& a, const Flat& b);

/// Value and extractor-group gradient of
/// (gamma/2) [mean_S1 L_s(theta - alpha g2) + mean_S2 L_s(theta - alpha g1)].
/// First order treats the shifted gradients as gradients at theta; with
/// `hvp` the inner-step Jacobian is applied through central differences of
/// the inner gradient.
struct MetaTerm {
    double value = 0.0;
    std::vector<std::vector<double>> grads;
    double cosine = 0.0;
};

MetaTerm meta_term(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split, double gamma,
                   double alpha, bool hvp);

/// Perturb-then-evaluate value of the meta objective.
double meta_loss_exact(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split, double gamma,
                       double alpha);

/// (gamma/2)(mean_S1 L_s + mean_S2 L_s) - gamma alpha g1.g2 at theta.
double meta_loss_approx(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split, double gamma,
                        double alpha);

struct TaylorRow {
    double alpha = 0.0;
    double exact = 0.0;
    double approx = 0.0;
    double abs_error = 0.0;
    double decay_ratio = 0.0;  // abs_error / abs_error of the next row; NaN on the last row
};

/// Forces dropout off for the duration of the sweep.
std::vector<TaylorRow> verify_taylor(model::ModelBundle& bundle, MetaBatch batch, const DomainSplit& split,
                                     double gamma, std::span<const double> alphas);

void write_taylor_csv(const std::vector<TaylorRow>& rows, const std::filesystem::path& path);

}  // namespace gcldr::meta
