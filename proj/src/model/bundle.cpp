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

#include "gcldr/model/bundle.hpp"

#include <random>

#include "gcldr/errors.hpp"

namespace gcldr::model {

namespace {

std::mt19937_64 stream_for(std::uint64_t seed, const std::string& name) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (char ch : name) words.push_back(static_cast<unsigned char>(ch));
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

Network make(const NetworkSpec& spec, std::uint64_t seed) {
    auto rng = stream_for(seed, spec.name);
    return Network(spec, rng);
}

}  // namespace

// The dense layer feeding batchnorm carries no bias: batchnorm subtracts the
// batch mean, so such a bias would have an identically zero gradient.
NetworkSpec mapping_spec(std::size_t d, std::size_t width, double dropout) {
    return {"P",
            {LayerSpec::dense(d, width, false), LayerSpec::batchnorm(width), LayerSpec::act(width, Activation::swish),
             LayerSpec::drop(width, dropout)}};
}

NetworkSpec extractor_spec(const std::string& name, std::size_t in, std::size_t width) {
    return {name, {LayerSpec::dense(in, width), LayerSpec::act(width, Activation::tanh)}};
}

NetworkSpec head_spec(const std::string& name, std::size_t in, std::size_t out) {
    return {name, {LayerSpec::dense(in, out), LayerSpec::act(out, Activation::softmax)}};
}

ModelBundle build_bundle(const BundleDims& dims, std::uint64_t seed, const BundleLayout& layout) {
    if (dims.d < 2) throw ConfigError("build_bundle: input width d must be at least 2");
    if (dims.c < 2) throw ConfigError("build_bundle: class count c must be at least 2");
    if (dims.k < 2) throw ConfigError("build_bundle: domain count k must be at least 2, got " + std::to_string(dims.k));
    if (dims.p_width == 0 || dims.g_width == 0) throw ConfigError("build_bundle: widths must be positive");
    if (!layout.ci_space && (layout.global_ci || layout.local_ci || layout.disc_ci))
        throw ConfigError("build_bundle: ci heads require the ci space");

    ModelBundle b;
    b.dims = dims;
    b.layout = layout;
    const std::size_t g = dims.g_width;
    b.P = make(mapping_spec(dims.d, dims.p_width, dims.p_dropout), seed);
    b.G_cd = make(extractor_spec("G_cd", dims.p_width, g), seed);
    if (layout.ci_space) b.G_ci = make(extractor_spec("G_ci", dims.p_width, g), seed);
    if (layout.global_cd) b.R_g_cd = make(head_spec("R_g_cd", g, dims.c), seed);
    if (layout.global_ci) b.R_g_ci = make(head_spec("R_g_ci", g, dims.c), seed);
    for (std::size_t r = 0; r < dims.k; ++r) {
        if (layout.local_cd) b.R_l_cd.push_back(make(head_spec("R_l_cd_" + std::to_string(r), g, dims.c), seed));
        if (layout.local_ci) b.R_l_ci.push_back(make(head_spec("R_l_ci_" + std::to_string(r), g, dims.c), seed));
    }
    if (layout.disc_cd) b.D_cd = make(head_spec("D_cd", g, dims.k), seed);
    if (layout.disc_ci) b.D_ci = make(head_spec("D_ci", g, dims.k), seed);
    return b;
}

namespace {

template <class B, class N>
std::vector<std::pair<std::string, N*>> named_impl(B& b) {
    std::vector<std::pair<std::string, N*>> out;
    out.emplace_back("P", &b.P);
    out.emplace_back("G_cd", &b.G_cd);
    if (b.G_ci) out.emplace_back("G_ci", &*b.G_ci);
    if (b.R_g_cd) out.emplace_back("R_g_cd", &*b.R_g_cd);
    if (b.R_g_ci) out.emplace_back("R_g_ci", &*b.R_g_ci);
    for (std::size_t r = 0; r < b.R_l_cd.size(); ++r) out.emplace_back("R_l_cd_" + std::to_string(r), &b.R_l_cd[r]);
    for (std::size_t r = 0; r < b.R_l_ci.size(); ++r) out.emplace_back("R_l_ci_" + std::to_string(r), &b.R_l_ci[r]);
    if (b.D_cd) out.emplace_back("D_cd", &*b.D_cd);
    if (b.D_ci) out.emplace_back("D_ci", &*b.D_ci);
    return out;
}

bool is_extractor(const std::string& name) { return name == "P" || name == "G_cd" || name == "G_ci"; }

}  // namespace

std::vector<std::pair<std::string, Network*>> named_networks(ModelBundle& bundle) {
    return named_impl<ModelBundle, Network>(bundle);
}

std::vector<std::pair<std::string, const Network*>> named_networks(const ModelBundle& bundle) {
    return named_impl<const ModelBundle, const Network>(bundle);
}

std::vector<ad::Tensor> select_group(const ModelBundle& bundle, Group which) {
    std::vector<ad::Tensor> out;
    for (const auto& [name, net] : named_networks(bundle)) {
        if (is_extractor(name) != (which == Group::extractors)) continue;
        for (auto& p : net->parameters()) out.push_back(p);
    }
    return out;
}

std::vector<ad::Tensor> all_parameters(const ModelBundle& bundle) {
    std::vector<ad::Tensor> out;
    for (const auto& [name, net] : named_networks(bundle))
        for (auto& p : net->parameters()) out.push_back(p);
    return out;
}

std::size_t parameter_count(const ModelBundle& bundle) {
    std::size_t n = 0;
    for (const auto& p : all_parameters(bundle)) n += p.size();
    return n;
}

Features forward_features(ModelBundle& bundle, const ad::Tensor& x, ForwardContext& ctx) {
    const ad::Tensor h = bundle.P.forward(x, ctx);
    Features f;
    f.cd = bundle.G_cd.forward(h, ctx);
    if (bundle.G_ci) f.ci = bundle.G_ci->forward(h, ctx);
    return f;
}

Features forward_features(ModelBundle& bundle, const ad::Tensor& x) {
    ForwardContext ctx;
    return forward_features(bundle, x, ctx);
}

ad::Tensor head_forward(Network& head, const ad::Tensor& f) {
    if (!head.spec().ends_in_softmax()) throw ContractError("head '" + head.spec().name + "' must end in softmax");
    return head.forward(f);
}

ModelBundle clone_bundle(const ModelBundle& bundle) {
    ModelBundle copy = bundle;
    for (auto& [name, net] : named_networks(copy)) *net = net->clone();
    return copy;
}

}  // namespace gcldr::model
