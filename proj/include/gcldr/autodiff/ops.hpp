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
#include <span>
#include <vector>

#include "gcldr/autodiff/tensor.hpp"

// Differentiable primitives. Matrices are rank-2 row-major tensors, row
// vectors are rank-1, and scalars have shape [1].
namespace gcldr::ad {

inline constexpr double kLogFloor = 1e-12;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& x, const Tensor& v);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);

Tensor tanh(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor swish(const Tensor& t);
Tensor exp(const Tensor& t);
/// log(max(t, floor)); entries at the floor pass no gradient.
Tensor log_floored(const Tensor& t, double floor = kLogFloor);

/// Row-wise softmax of a [b x n] matrix.
Tensor softmax_rows(const Tensor& t);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
/// [b x n] -> [b x 1]
Tensor row_sum(const Tensor& t);

/// out[i] = t[i, index[i]] as a [b x 1] column.
Tensor gather_cols(const Tensor& t, std::span<const std::size_t> index);
Tensor column(const Tensor& t, std::size_t j);
Tensor concat_cols(std::span<const Tensor> parts);

enum class Mode { train, infer };

struct BatchStats {
    std::vector<double> mean;
    std::vector<double> var;  // biased, as used for normalization
};

/// Batch normalization over the rows of [b x h] using batch statistics.
/// The statistics are reported through `stats` so the caller can maintain
/// running averages.
Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                       BatchStats* stats = nullptr);
Tensor batchnorm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::span<const double> mean,
                       std::span<const double> var, double eps);

/// Inverted dropout: survivors are scaled by 1/(1-rate). Identity in infer mode.
Tensor dropout(const Tensor& t, double rate, std::mt19937_64& rng, Mode mode);

/// Mean of -log(max(p[i, y_i], 1e-12)) over the batch.
Tensor cross_entropy(const Tensor& probs, std::span<const std::size_t> labels);

}  // namespace gcldr::ad
