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

#include "gcldr/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "gcldr/errors.hpp"

namespace gcldr::eval {

double auc_one_vs_rest(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw DimensionError("auc: scores and mask differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::uint64_t pos = 0, neg = 0;
    for (bool p : positive) (p ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw UndefinedAucError("auc: need both positives and negatives");

    // Twice the Mann-Whitney count, kept integral so the result is exact.
    std::uint64_t twice = 0, neg_below = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::uint64_t tie_pos = 0, tie_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (positive[order[j]] ? tie_pos : tie_neg) += 1;
            ++j;
        }
        twice += tie_pos * (2 * neg_below + tie_neg);
        neg_below += tie_neg;
        i = j;
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

MetricsReport metrics(std::span<const double> probs, std::size_t c, std::span<const std::size_t> labels, double tau) {
    const std::size_t n = labels.size();
    if (c == 0 || probs.size() != n * c) throw DimensionError("metrics: probability table is not n x c");
    if (n == 0) throw DimensionError("metrics: empty evaluation set");
    for (auto y : labels)
        if (y >= c) throw LabelError("metrics: label " + std::to_string(y) + " outside " + std::to_string(c) + " classes");

    MetricsReport rep;
    rep.tau = tau;
    rep.per_class_auc.assign(c, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> score(n);
    std::vector<bool> pos_vec(n);
    double sum_auc = 0.0, sum_far = 0.0, sum_frr = 0.0;
    std::size_t used = 0;
    for (std::size_t j = 0; j < c; ++j) {
        std::size_t pos = 0, neg = 0, false_acc = 0, false_rej = 0;
        for (std::size_t i = 0; i < n; ++i) {
            score[i] = probs[i * c + j];
            const bool p = labels[i] == j;
            pos_vec[i] = p;
            if (p) {
                ++pos;
                false_rej += score[i] < tau;
            } else {
                ++neg;
                false_acc += score[i] >= tau;
            }
        }
        if (pos == 0 || neg == 0) {
            rep.excluded.push_back(j);
            continue;
        }
        const double auc = auc_one_vs_rest(score, pos_vec);
        rep.per_class_auc[j] = auc;
        sum_auc += auc;
        sum_far += static_cast<double>(false_acc) / static_cast<double>(neg);
        sum_frr += static_cast<double>(false_rej) / static_cast<double>(pos);
        ++used;
    }
    if (used == 0) throw UndefinedAucError("metrics: no class has both positives and negatives");
    const double u = static_cast<double>(used);
    rep.aauc = sum_auc / u;
    rep.afar = sum_far / u;
    rep.afrr = sum_frr / u;
    rep.abfr = (rep.afar + rep.afrr) / 2.0;

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = probs.subspan(i * c, c);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        correct += best == labels[i];
    }
    rep.acc1 = static_cast<double>(correct) / static_cast<double>(n);
    return rep;
}

MetricsReport metrics(const ad::Tensor& probs, std::span<const std::size_t> labels, double tau) {
    if (probs.rank() != 2) throw DimensionError("metrics: expected an n x c matrix");
    return metrics(probs.values(), probs.cols(), labels, tau);
}

}  // namespace gcldr::eval
