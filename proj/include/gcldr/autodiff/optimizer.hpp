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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcldr/autodiff/tensor.hpp"

namespace gcldr::ad {

enum class OptimizerKind { adam, sgd };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;  // first moments (adam only)
    std::vector<std::vector<double>> v;  // second moments (adam only)
};

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::span<const Tensor> params);

/// Updates `params` in place. Throws DivergenceError on a non-finite gradient,
/// leaving every parameter untouched.
void optimizer_step(std::span<Tensor> params, const std::vector<std::vector<double>>& grads, OptimizerState& state);

}  // namespace gcldr::ad
