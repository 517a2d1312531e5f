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

#include "gcldr/autodiff/optimizer.hpp"

#include <cmath>

#include "gcldr/errors.hpp"

namespace gcldr::ad {

OptimizerKind parse_optimizer_kind(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::span<const Tensor> params) {
    if (!(config.lr > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
    OptimizerState state{config, 0, {}, {}};
    if (config.kind == OptimizerKind::adam) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    return state;
}

void optimizer_step(std::span<Tensor> params, const std::vector<std::vector<double>>& grads, OptimizerState& state) {
    if (grads.size() != params.size()) throw DimensionError("optimizer: gradient count differs from parameter count");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (grads[p].size() != params[p].size())
            throw DimensionError("optimizer: gradient " + std::to_string(p) + " has the wrong size");
        for (double g : grads[p])
            if (!std::isfinite(g))
                throw DivergenceError("optimizer: non-finite gradient in parameter " + std::to_string(p) +
                                      " at step " + std::to_string(state.step + 1));
    }
    const auto& cfg = state.config;
    ++state.step;
    if (cfg.kind == OptimizerKind::sgd) {
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto w = params[p].values_mut();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.lr * grads[p][i];
        }
        return;
    }
    if (state.m.size() != params.size()) throw ContractError("optimizer: state was built for different parameters");
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].values_mut();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double g = grads[p][i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            w[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
        }
    }
}

}  // namespace gcldr::ad
