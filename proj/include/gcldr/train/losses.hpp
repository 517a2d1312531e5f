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

#include "gcldr/autodiff/tensor.hpp"
#include "gcldr/ldd/ldd.hpp"
#include "gcldr/model/bundle.hpp"
#include "gcldr/train/config.hpp"

namespace gcldr::train {

ad::Tensor loss_cd(model::ModelBundle& bundle, const ad::Tensor& f_cd, std::span<const std::size_t> y);

/// Trains R_g_ci only: f_ci is detached inside.
ad::Tensor loss_ci(model::ModelBundle& bundle, const ad::Tensor& f_ci, std::span<const std::size_t> y);

/// (1/(b c)) sum_i sum_j (p(y=j | f_ci) - prior_j)^2.
ad::Tensor loss_ac(model::ModelBundle& bundle, const ad::Tensor& f_ci, const ClassPrior& prior);

/// Sum of discovery losses over the spaces whose posterior is given.
ad::Tensor loss_d(model::ModelBundle& bundle, const ad::Tensor& f_cd, const ad::Tensor& f_ci,
                  std::span<const std::size_t> y, const ldd::PosteriorMatrix* rho_cd,
                  const ldd::PosteriorMatrix* rho_ci);

/// Sum of elimination losses over the spaces that have a discriminator and a
/// defined feature tensor.
ad::Tensor loss_u(model::ModelBundle& bundle, const ad::Tensor& f_cd, const ad::Tensor& f_ci,
                  std::span<const std::size_t> y);

}  // namespace gcldr::train
