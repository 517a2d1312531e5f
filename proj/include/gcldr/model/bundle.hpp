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
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcldr/model/network.hpp"

namespace gcldr::model {

struct BundleDims {
    std::size_t d = 0;  // input width
    std::size_t c = 0;  // classes
    std::size_t k = 2;  // latent domains
    std::size_t p_width = 512;
    std::size_t g_width = 128;
    double p_dropout = 0.5;
};

/// Which sub-networks exist. The full method has all of them.
struct BundleLayout {
    bool ci_space = true;
    bool global_cd = true;
    bool global_ci = true;
    bool local_cd = true;
    bool local_ci = true;
    bool disc_cd = true;
    bool disc_ci = true;
};

enum class Space { cd, ci };
enum class Group { extractors, heads };

struct ModelBundle {
    BundleDims dims;
    BundleLayout layout;

    Network P;
    Network G_cd;
    std::optional<Network> G_ci;
    std::optional<Network> R_g_cd;
    std::optional<Network> R_g_ci;
    std::vector<Network> R_l_cd;
    std::vector<Network> R_l_ci;
    std::optional<Network> D_cd;
    std::optional<Network> D_ci;

    std::vector<Network>& local_heads(Space s) { return s == Space::cd ? R_l_cd : R_l_ci; }
    std::optional<Network>& discriminator(Space s) { return s == Space::cd ? D_cd : D_ci; }
    std::optional<Network>& global_head(Space s) { return s == Space::cd ? R_g_cd : R_g_ci; }
};

NetworkSpec mapping_spec(std::size_t d, std::size_t width, double dropout);
NetworkSpec extractor_spec(const std::string& name, std::size_t in, std::size_t width);
NetworkSpec head_spec(const std::string& name, std::size_t in, std::size_t out);

/// Every sub-network is initialized from its own stream derived from
/// (seed, network name), so shared sub-networks start identical across layouts.
ModelBundle build_bundle(const BundleDims& dims, std::uint64_t seed, const BundleLayout& layout = {});

/// Name/network pairs in a fixed order: P, G_cd, G_ci, R_g_cd, R_g_ci,
/// R_l_cd_r, R_l_ci_r, D_cd, D_ci (absent members skipped).
std::vector<std::pair<std::string, Network*>> named_networks(ModelBundle& bundle);
std::vector<std::pair<std::string, const Network*>> named_networks(const ModelBundle& bundle);

std::vector<ad::Tensor> select_group(const ModelBundle& bundle, Group which);
std::vector<ad::Tensor> all_parameters(const ModelBundle& bundle);
std::size_t parameter_count(const ModelBundle& bundle);

struct Features {
    ad::Tensor cd;
    ad::Tensor ci;  // undefined without a ci space
};

Features forward_features(ModelBundle& bundle, const ad::Tensor& x, ForwardContext& ctx);
Features forward_features(ModelBundle& bundle, const ad::Tensor& x);  // infer mode

ad::Tensor head_forward(Network& head, const ad::Tensor& f);

ModelBundle clone_bundle(const ModelBundle& bundle);

}  // namespace gcldr::model
