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
#include <span>
#include <vector>

#include "gcldr/autodiff/tensor.hpp"

namespace gcldr::eval {

/// Mann-Whitney AUC: P(score of a random positive > score of a random
/// negative), ties counted 1/2.
double auc_one_vs_rest(std::span<const double> scores, const std::vector<bool>& positive);

struct MetricsReport {
    double aauc = 0.0;
    double afar = 0.0;
    double afrr = 0.0;
    double abfr = 0.0;
    double acc1 = 0.0;
    double tau = 0.0;
    std::vector<double> per_class_auc;  // NaN for excluded classes
    std::vector<std::size_t> excluded;  // classes without positives or negatives
};

/// One-vs-rest scores are the softmax columns. FAR_j counts negatives with
/// score >= tau, FRR_j positives with score < tau.
MetricsReport metrics(std::span<const double> probs, std::size_t c, std::span<const std::size_t> labels, double tau);
MetricsReport metrics(const ad::Tensor& probs, std::span<const std::size_t> labels, double tau);

inline double default_tau(std::size_t c) { return 1.0 / static_cast<double>(c); }

}  // namespace gcldr::eval
