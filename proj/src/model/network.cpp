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

#include "gcldr/model/network.hpp"

#include <cmath>

#include "gcldr/errors.hpp"

namespace gcldr::model {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::activation: return "activation";
        case LayerKind::dropout: return "dropout";
    }
    return "?";
}

std::string to_string(Activation act) {
    switch (act) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::swish: return "swish";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
    for (auto k : {LayerKind::dense, LayerKind::batchnorm, LayerKind::activation, LayerKind::dropout})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown layer kind '" + name + "'");
}

Activation parse_activation(const std::string& name) {
    for (auto a : {Activation::tanh, Activation::relu, Activation::swish, Activation::softmax})
        if (to_string(a) == name) return a;
    throw ConfigError("unknown activation '" + name + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, bool bias) {
    return {LayerKind::dense, in, out, Activation::tanh, 0.0, bias};
}
LayerSpec LayerSpec::batchnorm(std::size_t width) { return {LayerKind::batchnorm, width, width}; }
LayerSpec LayerSpec::act(std::size_t width, Activation a) { return {LayerKind::activation, width, width, a}; }
LayerSpec LayerSpec::drop(std::size_t width, double rate) {
    return {LayerKind::dropout, width, width, Activation::tanh, rate};
}

std::size_t NetworkSpec::input_width() const {
    if (layers.empty()) throw ConfigError("network '" + name + "' has no layers");
    return layers.front().in;
}

std::size_t NetworkSpec::output_width() const {
    if (layers.empty()) throw ConfigError("network '" + name + "' has no layers");
    return layers.back().out;
}

bool NetworkSpec::ends_in_softmax() const {
    return !layers.empty() && layers.back().kind == LayerKind::activation &&
           layers.back().activation == Activation::softmax;
}

void NetworkSpec::validate() const {
    if (layers.empty()) throw ConfigError("network '" + name + "' has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.in == 0 || l.out == 0) throw ConfigError("network '" + name + "': zero width at layer " + std::to_string(i));
        if (l.kind != LayerKind::dense && l.in != l.out)
            throw ConfigError("network '" + name + "': layer " + std::to_string(i) + " must preserve width");
        if (i > 0 && layers[i - 1].out != l.in)
            throw ConfigError("network '" + name + "': widths do not chain at layer " + std::to_string(i));
        if (l.kind == LayerKind::dropout && !(l.rate >= 0.0 && l.rate < 1.0))
            throw ConfigError("network '" + name + "': dropout rate outside [0,1)");
    }
}

Network::Network(NetworkSpec spec, std::mt19937_64& init_rng) : spec_(std::move(spec)) {
    spec_.validate();
    for (const auto& ls : spec_.layers) {
        Layer layer{ls, {}, {}, {}, {}, {}, {}};
        if (ls.kind == LayerKind::dense) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(ls.in));
            std::uniform_real_distribution<double> u(-bound, bound);
            std::vector<double> w(ls.in * ls.out);
            for (auto& x : w) x = u(init_rng);
            layer.weight = ad::Tensor::from({ls.in, ls.out}, std::move(w), true);
            if (ls.bias) layer.bias = ad::Tensor::zeros({1, ls.out}, true);
        } else if (ls.kind == LayerKind::batchnorm) {
            layer.gamma = ad::Tensor::from({1, ls.out}, std::vector<double>(ls.out, 1.0), true);
            layer.beta = ad::Tensor::zeros({1, ls.out}, true);
            layer.running_mean.assign(ls.out, 0.0);
            layer.running_var.assign(ls.out, 1.0);
        }
        layers_.push_back(std::move(layer));
    }
}

ad::Tensor Network::forward(const ad::Tensor& x, ForwardContext& ctx) {
    if (x.rank() != 2 || x.cols() != spec_.input_width())
        throw DimensionError("network '" + spec_.name + "': input " + ad::shape_string(x.shape()) + " for width " +
                             std::to_string(spec_.input_width()));
    ad::Tensor h = x;
    for (auto& layer : layers_) {
        const auto& ls = layer.spec;
        switch (ls.kind) {
            case LayerKind::dense:
                h = ad::matmul(h, layer.weight);
                if (ls.bias) h = ad::add_rowvec(h, layer.bias);
                break;
            case LayerKind::batchnorm:
                if (ctx.mode == ad::Mode::train) {
                    ad::BatchStats stats;
                    h = ad::batchnorm_train(h, layer.gamma, layer.beta, kBatchNormEps, &stats);
                    if (ctx.update_running_stats) {
                        const double n = static_cast<double>(x.rows());
                        for (std::size_t j = 0; j < ls.out; ++j) {
                            layer.running_mean[j] =
                                (1.0 - kBatchNormMomentum) * layer.running_mean[j] + kBatchNormMomentum * stats.mean[j];
                            layer.running_var[j] = (1.0 - kBatchNormMomentum) * layer.running_var[j] +
                                                   kBatchNormMomentum * stats.var[j] * n / (n - 1.0);
                        }
                    }
                } else {
                    h = ad::batchnorm_infer(h, layer.gamma, layer.beta, layer.running_mean, layer.running_var,
                                            kBatchNormEps);
                }
                break;
            case LayerKind::activation:
                switch (ls.activation) {
                    case Activation::tanh: h = ad::tanh(h); break;
                    case Activation::relu: h = ad::relu(h); break;
                    case Activation::swish: h = ad::swish(h); break;
                    case Activation::softmax: h = ad::softmax_rows(h); break;
                }
                break;
            case LayerKind::dropout:
                if (ctx.mode == ad::Mode::train && ctx.dropout && ls.rate > 0.0) {
                    if (!ctx.rng) throw ContractError("network '" + spec_.name + "': dropout needs an rng in train mode");
                    h = ad::dropout(h, ls.rate, *ctx.rng, ctx.mode);
                }
                break;
        }
    }
    return h;
}

ad::Tensor Network::forward(const ad::Tensor& x) {
    ForwardContext ctx;
    return forward(x, ctx);
}

std::vector<ad::Tensor> Network::parameters() const {
    std::vector<ad::Tensor> out;
    for (const auto& l : layers_) {
        if (l.spec.kind == LayerKind::dense) {
            out.push_back(l.weight);
            if (l.spec.bias) out.push_back(l.bias);
        } else if (l.spec.kind == LayerKind::batchnorm) {
            out.push_back(l.gamma);
            out.push_back(l.beta);
        }
    }
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

Network Network::clone() const {
    Network copy;
    copy.spec_ = spec_;
    copy.layers_ = layers_;
    for (auto& l : copy.layers_) {
        for (ad::Tensor* t : {&l.weight, &l.bias, &l.gamma, &l.beta})
            if (t->defined()) *t = t->clone(true);
    }
    return copy;
}

}  // namespace gcldr::model
