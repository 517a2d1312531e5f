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
#include <functional>
#include <span>
#include <vector>

#include "gcldr/autodiff/tensor.hpp"

namespace gcldr::ad {

using LossFn = std::function<Tensor()>;
using GradientHook = std::function<void(std::vector<std::vector<double>>&)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_entry = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric) noexcept;

/// Central differences over every entry of every parameter. `loss_fn` must be
/// deterministic; reseed any RNG it uses inside the call. `corrupt` edits the
/// analytic gradients before comparison.
GradCheckReport finite_diff_report(const LossFn& loss_fn, std::span<const Tensor> params, double eps = 1e-5,
                                   const GradientHook& corrupt = {});

double finite_diff_check(const LossFn& loss_fn, std::span<const Tensor> params, double eps = 1e-5);

}  // namespace gcldr::ad
