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

#include "gcldr/model/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gcldr/errors.hpp"

namespace gcldr::model {

using nlohmann::json;

namespace {

json tensor_json(const ad::Tensor& t) {
    return {{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

ad::Tensor tensor_from(const json& j) {
    return ad::Tensor::from(j.at("shape").get<ad::Shape>(), j.at("values").get<std::vector<double>>(), true);
}

json network_json(const Network& net) {
    json layers = json::array();
    for (const auto& l : net.layers()) {
        json e{{"kind", to_string(l.spec.kind)}, {"in", l.spec.in}, {"out", l.spec.out}};
        switch (l.spec.kind) {
            case LayerKind::dense:
                e["bias"] = l.spec.bias;
                e["weight"] = tensor_json(l.weight);
                if (l.spec.bias) e["bias_values"] = tensor_json(l.bias);
                break;
            case LayerKind::batchnorm:
                e["gamma"] = tensor_json(l.gamma);
                e["beta"] = tensor_json(l.beta);
                e["running_mean"] = l.running_mean;
                e["running_var"] = l.running_var;
                break;
            case LayerKind::activation: e["activation"] = to_string(l.spec.activation); break;
            case LayerKind::dropout: e["rate"] = l.spec.rate; break;
        }
        layers.push_back(std::move(e));
    }
    return {{"name", net.spec().name}, {"layers", std::move(layers)}};
}

Network network_from(const json& j) {
    NetworkSpec spec;
    spec.name = j.at("name").get<std::string>();
    for (const auto& e : j.at("layers")) {
        LayerSpec ls;
        ls.kind = parse_layer_kind(e.at("kind").get<std::string>());
        ls.in = e.at("in").get<std::size_t>();
        ls.out = e.at("out").get<std::size_t>();
        if (ls.kind == LayerKind::dense) ls.bias = e.at("bias").get<bool>();
        if (ls.kind == LayerKind::activation) ls.activation = parse_activation(e.at("activation").get<std::string>());
        if (ls.kind == LayerKind::dropout) ls.rate = e.at("rate").get<double>();
        spec.layers.push_back(ls);
    }
    std::mt19937_64 unused(0);
    Network net(spec, unused);
    const auto& entries = j.at("layers");
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& l = net.layers()[i];
        const auto& e = entries[i];
        if (l.spec.kind == LayerKind::dense) {
            l.weight = tensor_from(e.at("weight"));
            if (l.spec.bias) l.bias = tensor_from(e.at("bias_values"));
            if (l.weight.shape() != ad::Shape{l.spec.in, l.spec.out})
                throw ConfigError("checkpoint: weight shape mismatch in '" + spec.name + "'");
        } else if (l.spec.kind == LayerKind::batchnorm) {
            l.gamma = tensor_from(e.at("gamma"));
            l.beta = tensor_from(e.at("beta"));
            l.running_mean = e.at("running_mean").get<std::vector<double>>();
            l.running_var = e.at("running_var").get<std::vector<double>>();
        }
    }
    return net;
}

}  // namespace

std::string checkpoint_to_string(const ModelBundle& bundle) {
    const auto& d = bundle.dims;
    const auto& lo = bundle.layout;
    json doc{{"format", "gcldr-checkpoint"},
             {"version", kCheckpointVersion},
             {"dims",
              {{"d", d.d}, {"c", d.c}, {"k", d.k}, {"p_width", d.p_width}, {"g_width", d.g_width},
               {"p_dropout", d.p_dropout}}},
             {"layout",
              {{"ci_space", lo.ci_space}, {"global_cd", lo.global_cd}, {"global_ci", lo.global_ci},
               {"local_cd", lo.local_cd}, {"local_ci", lo.local_ci}, {"disc_cd", lo.disc_cd},
               {"disc_ci", lo.disc_ci}}}};
    json nets = json::object();
    for (const auto& [name, net] : named_networks(bundle)) nets[name] = network_json(*net);
    doc["networks"] = std::move(nets);
    return doc.dump();
}

ModelBundle checkpoint_from_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("checkpoint: not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("format") != "gcldr-checkpoint" || doc.at("version") != kCheckpointVersion)
            throw ConfigError("checkpoint: unsupported format or version");
        ModelBundle b;
        const auto& d = doc.at("dims");
        b.dims = {d.at("d"), d.at("c"), d.at("k"), d.at("p_width"), d.at("g_width"), d.at("p_dropout")};
        const auto& lo = doc.at("layout");
        b.layout = {lo.at("ci_space"), lo.at("global_cd"), lo.at("global_ci"), lo.at("local_cd"),
                    lo.at("local_ci"),  lo.at("disc_cd"),   lo.at("disc_ci")};
        const auto& nets = doc.at("networks");
        b.P = network_from(nets.at("P"));
        b.G_cd = network_from(nets.at("G_cd"));
        if (nets.contains("G_ci")) b.G_ci = network_from(nets.at("G_ci"));
        if (nets.contains("R_g_cd")) b.R_g_cd = network_from(nets.at("R_g_cd"));
        if (nets.contains("R_g_ci")) b.R_g_ci = network_from(nets.at("R_g_ci"));
        for (std::size_t r = 0; r < b.dims.k; ++r) {
            const auto cd = "R_l_cd_" + std::to_string(r);
            const auto ci = "R_l_ci_" + std::to_string(r);
            if (nets.contains(cd)) b.R_l_cd.push_back(network_from(nets.at(cd)));
            if (nets.contains(ci)) b.R_l_ci.push_back(network_from(nets.at(ci)));
        }
        if (nets.contains("D_cd")) b.D_cd = network_from(nets.at("D_cd"));
        if (nets.contains("D_ci")) b.D_ci = network_from(nets.at("D_ci"));
        return b;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint: malformed document: ") + e.what());
    }
}

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("checkpoint: cannot write " + path.string());
    out << checkpoint_to_string(bundle);
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("checkpoint: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_string(ss.str());
}

}  // namespace gcldr::model
