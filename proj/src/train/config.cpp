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

#include "gcldr/train/config.hpp"

#include <algorithm>

#include "gcldr/errors.hpp"

namespace gcldr::train {

namespace {
constexpr std::pair<Variant, const char*> kNames[] = {
    {Variant::full, "full"},
    {Variant::direct, "direct"},
    {Variant::single_space, "single_space"},
    {Variant::feature_based, "feature_based"},
    {Variant::class_confuse, "class_confuse"},
    {Variant::no_unification, "no_unification"},
    {Variant::meta, "meta"},
};
}  // namespace

std::string to_string(Variant v) {
    for (const auto& [var, name] : kNames)
        if (var == v) return name;
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (const auto& [var, n] : kNames)
        if (name == n) return var;
    throw ConfigError("unknown variant '" + name + "'");
}

std::vector<Variant> all_variants() {
    std::vector<Variant> out;
    for (const auto& [var, name] : kNames) out.push_back(var);
    return out;
}

void TrainConfig::validate() const {
    if (k < 2) throw ConfigError("train: k must be at least 2");
    if (batch_size < 2) throw ConfigError("train: batch size must be at least 2");
    if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
    if (!(lr > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("train: gamma must be nonnegative");
    if (!(alpha >= 0.0)) throw ConfigError("train: alpha must be nonnegative");
    if (!(p_dropout >= 0.0 && p_dropout < 1.0)) throw ConfigError("train: dropout must lie in [0,1)");
    if (p_width == 0 || g_width == 0) throw ConfigError("train: widths must be positive");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("train: val_fraction must lie in [0,1)");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("train: tau must lie in [0,1]");
    for (double w : {weights.cd, weights.ci, weights.ac, weights.d, weights.u})
        if (!(w >= 0.0)) throw ConfigError("train: loss weights must be nonnegative");
}

ClassPrior estimate_prior(std::span<const std::size_t> labels, std::size_t c) {
    if (labels.empty()) throw ConfigError("estimate_prior: no labels");
    if (c == 0) c = *std::max_element(labels.begin(), labels.end()) + 1;
    ClassPrior prior{std::vector<double>(c, 0.0)};
    for (auto y : labels) {
        if (y >= c) throw LabelError("estimate_prior: label " + std::to_string(y) + " outside " + std::to_string(c));
        prior.p[y] += 1.0;
    }
    for (auto& p : prior.p) p /= static_cast<double>(labels.size());
    return prior;
}

model::BundleLayout layout_for(Variant v) {
    model::BundleLayout lo;
    switch (v) {
        case Variant::full:
        case Variant::meta: break;
        case Variant::direct: lo = {false, true, false, false, false, false, false}; break;
        case Variant::single_space: lo = {false, true, false, true, false, true, false}; break;
        case Variant::feature_based: lo = {true, true, true, false, false, true, true}; break;
        case Variant::class_confuse: lo = {true, true, true, false, false, false, false}; break;
        case Variant::no_unification: lo = {false, false, false, true, false, true, false}; break;
    }
    return lo;
}

LossWiring wiring_for(Variant v) {
    LossWiring w;
    switch (v) {
        case Variant::full:
        case Variant::meta:
        case Variant::feature_based: break;
        case Variant::direct: w = {true, false, false, false, false, false, false}; break;
        case Variant::single_space: w = {true, false, false, true, false, true, false}; break;
        case Variant::class_confuse: w = {true, true, true, false, false, false, false}; break;
        case Variant::no_unification: w = {false, false, false, true, false, false, true}; break;
    }
    return w;
}

}  // namespace gcldr::train
