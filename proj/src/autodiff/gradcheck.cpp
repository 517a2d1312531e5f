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

#include "gcldr/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace gcldr::ad {

double relative_error(double analytic, double numeric) noexcept {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_report(const LossFn& loss_fn, std::span<const Tensor> params, double eps,
                                   const GradientHook& corrupt) {
    auto analytic = gradients(loss_fn(), params);
    if (corrupt) corrupt(analytic);

    GradCheckReport report;
    NoGradGuard no_grad;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor param = params[p];
        auto values = param.values_mut();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = loss_fn().item();
            values[i] = saved - eps;
            const double down = loss_fn().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = relative_error(analytic[p][i], numeric);
            if (err > report.max_rel_error || (p == 0 && i == 0)) {
                report = {err, p, i, analytic[p][i], numeric};
            }
        }
    }
    return report;
}

double finite_diff_check(const LossFn& loss_fn, std::span<const Tensor> params, double eps) {
    return finite_diff_report(loss_fn, params, eps).max_rel_error;
}

}  // namespace gcldr::ad
