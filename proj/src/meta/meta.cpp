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

#include "gcldr/meta/meta.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/errors.hpp"

namespace gcldr::meta {

using ad::Tensor;

DomainSplit split_domains(std::size_t k, std::mt19937_64& rng) {
    if (k < 2) throw ConfigError("split_domains: k must be at least 2");
    std::bernoulli_distribution coin(0.5);
    while (true) {
        DomainSplit s;
        for (std::size_t r = 0; r < k; ++r) (coin(rng) ? s.s1 : s.s2).push_back(r);
        if (!s.s1.empty() && !s.s2.empty()) return s;
    }
}

namespace {

model::Features replay_features(model::ModelBundle& bundle, const MetaBatch& batch) {
    std::mt19937_64 rng = batch.masks;
    model::ForwardContext ctx{ad::Mode::train, &rng, false, batch.dropout};
    return model::forward_features(bundle, batch.x, ctx);
}

Flat flatten(const std::vector<std::vector<double>>& parts) {
    Flat out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::vector<std::vector<double>> unflatten(const Flat& flat, const std::vector<Tensor>& like) {
    std::vector<std::vector<double>> out;
    std::size_t at = 0;
    for (const auto& t : like) {
        out.emplace_back(flat.begin() + static_cast<long>(at), flat.begin() + static_cast<long>(at + t.size()));
        at += t.size();
    }
    return out;
}

Flat snapshot(const std::vector<Tensor>& params) {
    Flat out;
    for (const auto& t : params) out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
}

void assign(const std::vector<Tensor>& params, const Flat& flat) {
    std::size_t at = 0;
    for (auto t : params) {
        auto v = t.values_mut();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = flat[at + i];
        at += v.size();
    }
}

// theta + s * dir
Flat axpy(const Flat& theta, double s, const Flat& dir) {
    Flat out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] + s * dir[i];
    return out;
}

struct Restore {
    const std::vector<Tensor>& params;
    Flat saved;
    ~Restore() { assign(params, saved); }
};

Flat set_gradient(model::ModelBundle& bundle, const MetaBatch& batch, std::span<const std::size_t> set,
                  const std::vector<Tensor>& params, double* value = nullptr) {
    const Tensor loss = set_loss(bundle, batch, set);
    if (value) *value = loss.item();
    return flatten(ad::gradients(loss, params));
}

double set_value(model::ModelBundle& bundle, const MetaBatch& batch, std::span<const std::size_t> set) {
    ad::NoGradGuard no_grad;
    return set_loss(bundle, batch, set).item();
}

}  // namespace

Tensor merged_soft_loss(model::ModelBundle& bundle, const MetaBatch& batch, std::size_t r) {
    const model::Features f = replay_features(bundle, batch);
    Tensor total = ldd::soft_domain_loss(ldd::ldd_heads(bundle, model::Space::cd), f.cd, batch.y, batch.rho_cd, r);
    if (batch.rho_ci)
        total = ad::add(total,
                        ldd::soft_domain_loss(ldd::ldd_heads(bundle, model::Space::ci), f.ci, batch.y, *batch.rho_ci, r));
    return total;
}

Tensor set_loss(model::ModelBundle& bundle, const MetaBatch& batch, std::span<const std::size_t> set) {
    if (set.empty()) throw ContractError("set_loss: empty domain set");
    const model::Features f = replay_features(bundle, batch);
    const auto cd = ldd::ldd_heads(bundle, model::Space::cd);
    Tensor total;
    for (auto r : set) {
        Tensor term = ldd::soft_domain_loss(cd, f.cd, batch.y, batch.rho_cd, r);
        if (batch.rho_ci)
            term = ad::add(term, ldd::soft_domain_loss(ldd::ldd_heads(bundle, model::Space::ci), f.ci, batch.y,
                                                       *batch.rho_ci, r));
        total = total.defined() ? ad::add(total, term) : term;
    }
    return ad::scale(total, 1.0 / static_cast<double>(set.size()));
}

MetaGradients meta_gradients(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split) {
    const auto params = model::select_group(bundle, model::Group::extractors);
    return {set_gradient(bundle, batch, split.s1, params), set_gradient(bundle, batch, split.s2, params)};
}

double dot(const Flat& a, const Flat& b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine(const Flat& a, const Flat& b) {
    const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

MetaTerm meta_term(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split, double gamma,
                   double alpha, bool hvp) {
    const auto params = model::select_group(bundle, model::Group::extractors);
    const Flat theta = snapshot(params);
    Restore restore{params, theta};
    const MetaGradients g = meta_gradients(bundle, batch, split);

    // Outer gradient of set `outer` evaluated at theta - alpha * inner_grad.
    auto shifted = [&](std::span<const std::size_t> outer, const Flat& inner_grad, double* value) {
        assign(params, axpy(theta, -alpha, inner_grad));
        Flat grad = set_gradient(bundle, batch, outer, params, value);
        assign(params, theta);
        return grad;
    };
    double v1 = 0.0, v2 = 0.0;
    Flat d1 = shifted(split.s1, g.g2, &v1);
    Flat d2 = shifted(split.s2, g.g1, &v2);

    if (hvp && alpha != 0.0) {
        double theta_norm = std::sqrt(dot(theta, theta));
        // (I - alpha H_inner) v with H_inner v from central differences of the inner gradient.
        auto correct = [&](Flat& v, std::span<const std::size_t> inner) {
            const double vn = std::sqrt(dot(v, v));
            if (vn == 0.0) return;
            const double eps = 1e-4 * (1.0 + theta_norm) / vn;
            assign(params, axpy(theta, eps, v));
            const Flat up = set_gradient(bundle, batch, inner, params);
            assign(params, axpy(theta, -eps, v));
            const Flat down = set_gradient(bundle, batch, inner, params);
            assign(params, theta);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= alpha * (up[i] - down[i]) / (2.0 * eps);
        };
        correct(d1, split.s2);
        correct(d2, split.s1);
    }

    MetaTerm out;
    out.value = 0.5 * gamma * (v1 + v2);
    Flat total(d1.size());
    for (std::size_t i = 0; i < total.size(); ++i) total[i] = 0.5 * gamma * (d1[i] + d2[i]);
    out.grads = unflatten(total, params);
    out.cosine = cosine(g.g1, g.g2);
    return out;
}

double meta_loss_exact(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split, double gamma,
                       double alpha) {
    const auto params = model::select_group(bundle, model::Group::extractors);
    const Flat theta = snapshot(params);
    Restore restore{params, theta};
    const MetaGradients g = meta_gradients(bundle, batch, split);
    assign(params, axpy(theta, -alpha, g.g2));
    const double a = set_value(bundle, batch, split.s1);
    assign(params, axpy(theta, -alpha, g.g1));
    const double b = set_value(bundle, batch, split.s2);
    return 0.5 * gamma * (a + b);
}

double meta_loss_approx(model::ModelBundle& bundle, const MetaBatch& batch, const DomainSplit& split, double gamma,
                        double alpha) {
    const MetaGradients g = meta_gradients(bundle, batch, split);
    const double a = set_value(bundle, batch, split.s1);
    const double b = set_value(bundle, batch, split.s2);
    return 0.5 * gamma * (a + b) - gamma * alpha * dot(g.g1, g.g2);
}

std::vector<TaylorRow> verify_taylor(model::ModelBundle& bundle, MetaBatch batch, const DomainSplit& split,
                                     double gamma, std::span<const double> alphas) {
    batch.dropout = false;
    std::vector<TaylorRow> rows;
    for (double alpha : alphas) {
        TaylorRow row;
        row.alpha = alpha;
        row.exact = meta_loss_exact(bundle, batch, split, gamma, alpha);
        row.approx = meta_loss_approx(bundle, batch, split, gamma, alpha);
        row.abs_error = std::abs(row.exact - row.approx);
        rows.push_back(row);
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i].decay_ratio = i + 1 < rows.size() ? rows[i].abs_error / rows[i + 1].abs_error
                                                  : std::numeric_limits<double>::quiet_NaN();
    return rows;
}

void write_taylor_csv(const std::vector<TaylorRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("taylor: cannot write " + path.string());
    out << "alpha,exact,approx,abs_error,decay_ratio\n";
    for (const auto& r : rows)
        out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.alpha, r.exact, r.approx, r.abs_error,
                           r.decay_ratio);
}

}  // namespace gcldr::meta
