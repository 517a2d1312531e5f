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
#include <random>
#include <string>
#include <vector>

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/autodiff/tensor.hpp"

namespace gcldr::model {

enum class LayerKind { dense, batchnorm, activation, dropout };
enum class Activation { tanh, relu, swish, softmax };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
LayerKind parse_layer_kind(const std::string& name);
Activation parse_activation(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::tanh;
    double rate = 0.0;
    bool bias = true;

    static LayerSpec dense(std::size_t in, std::size_t out, bool bias = true);
    static LayerSpec batchnorm(std::size_t width);
    static LayerSpec act(std::size_t width, Activation a);
    static LayerSpec drop(std::size_t width, double rate);
};

struct NetworkSpec {
    std::string name;
    std::vector<LayerSpec> layers;

    std::size_t input_width() const;
    std::size_t output_width() const;
    bool ends_in_softmax() const;
    /// Widths must chain and every non-dense layer must preserve width.
    void validate() const;
};

struct ForwardContext {
    ad::Mode mode = ad::Mode::infer;
    std::mt19937_64* rng = nullptr;  // required when a dropout layer runs in train mode
    bool update_running_stats = false;
    bool dropout = true;  // false keeps train-mode batchnorm but skips dropout
};

struct Layer {
    LayerSpec spec;
    ad::Tensor weight;  // dense: in x out
    ad::Tensor bias;    // dense: 1 x out when spec.bias
    ad::Tensor gamma;   // batchnorm scale
    ad::Tensor beta;    // batchnorm shift
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

class Network {
public:
    Network() = default;
    /// Fan-in scaled uniform weights U(-1/sqrt(in), 1/sqrt(in)), zero biases,
    /// batchnorm scale 1 and shift 0, running mean 0 and variance 1.
    Network(NetworkSpec spec, std::mt19937_64& init_rng);

    const NetworkSpec& spec() const noexcept { return spec_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    ad::Tensor forward(const ad::Tensor& x, ForwardContext& ctx);
    /// Inference-mode forward; the network must not contain dropout-active or
    /// stat-updating state changes.
    ad::Tensor forward(const ad::Tensor& x);

    std::vector<ad::Tensor> parameters() const;
    std::size_t parameter_count() const;
    Network clone() const;

private:
    NetworkSpec spec_;
    std::vector<Layer> layers_;
};

}  // namespace gcldr::model
