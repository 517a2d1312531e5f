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

#include "gcldr/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/errors.hpp"
#include "gcldr/eval/metrics.hpp"
#include "gcldr/eval/variants.hpp"
#include "gcldr/meta/meta.hpp"
#include "gcldr/train/losses.hpp"

namespace gcldr::train {

using ad::Tensor;

namespace {

constexpr std::uint64_t kMetaStreamSalt = 0x9e3779b97f4a7c15ULL;

void check_finite(double v, const char* name, const TrainState& s) {
    if (!std::isfinite(v))
        throw DivergenceError(fmt::format("{} is not finite at step {} (variant {}, seed {})", name, s.step,
                                          to_string(s.config.variant), s.config.seed));
}

Tensor accumulate(const Tensor& acc, double w, const Tensor& term) {
    const Tensor scaled = w == 1.0 ? term : ad::scale(term, w);
    return acc.defined() ? ad::add(acc, scaled) : scaled;
}

void apply(TrainState& s, model::Group group, const Tensor& loss, const std::vector<std::vector<double>>* extra) {
    auto params = model::select_group(s.bundle, group);
    auto grads = ad::gradients(loss, params);
    if (extra)
        for (std::size_t p = 0; p < grads.size(); ++p)
            for (std::size_t i = 0; i < grads[p].size(); ++i) grads[p][i] += (*extra)[p][i];
    auto& opt = group == model::Group::heads ? s.heads_opt : s.extractors_opt;
    ad::optimizer_step(params, grads, opt);
}

}  // namespace

TrainState init_training(const TrainConfig& config, std::size_t d, const ClassPrior& prior) {
    config.validate();
    auto setup = eval::make_variant(config, d, prior.p.size());
    TrainState s{config,
                 setup.wiring,
                 std::move(setup.bundle),
                 prior,
                 {},
                 {},
                 std::mt19937_64(config.seed),
                 std::mt19937_64(config.seed ^ kMetaStreamSalt),
                 0};
    const ad::OptimizerConfig oc{config.optimizer, config.lr};
    const auto heads = model::select_group(s.bundle, model::Group::heads);
    const auto ext = model::select_group(s.bundle, model::Group::extractors);
    s.heads_opt = ad::make_optimizer_state(oc, heads);
    s.extractors_opt = ad::make_optimizer_state(oc, ext);
    return s;
}

Tensor extractor_objective(TrainState& s, const Batch& batch, const model::Features& f, StepReport& report) {
    const auto& w = s.wiring;
    const auto& lw = s.config.weights;
    Tensor total;
    if (w.cd) {
        const Tensor l = loss_cd(s.bundle, f.cd, batch.y);
        report.l_cd = l.item();
        total = accumulate(total, lw.cd, l);
    }
    if (w.ac) {
        const Tensor l = loss_ac(s.bundle, f.ci, s.prior);
        report.l_ac = l.item();
        total = accumulate(total, lw.ac, l);
    }
    if (w.unify) {
        const Tensor l = loss_u(s.bundle, w.discover_cd ? f.cd : Tensor{}, w.discover_ci ? f.ci : Tensor{}, batch.y);
        report.l_u = l.item();
        total = accumulate(total, lw.u, l);
    }
    return total;
}

StepReport train_step(TrainState& s, const Batch& batch) {
    if (batch.y.size() < 2) throw DegenerateBatchError("train_step: batch needs at least 2 rows");
    ++s.step;
    const auto& w = s.wiring;
    const auto& lw = s.config.weights;
    StepReport report;

    model::ForwardContext first{ad::Mode::train, &s.rng, false};
    const model::Features live = model::forward_features(s.bundle, batch.x, first);
    const Tensor f_cd = live.cd.detach();
    const Tensor f_ci = live.ci.defined() ? live.ci.detach() : Tensor{};

    std::optional<ldd::PosteriorMatrix> rho_cd, rho_ci;
    if (w.discover_cd) rho_cd = ldd::compute_posteriors(ldd::ldd_heads(s.bundle, model::Space::cd), f_cd, batch.y);
    if (w.discover_ci) rho_ci = ldd::compute_posteriors(ldd::ldd_heads(s.bundle, model::Space::ci), f_ci, batch.y);

    Tensor heads_loss;
    if (w.cd) {
        const Tensor l = loss_cd(s.bundle, f_cd, batch.y);
        report.l_cd = l.item();
        heads_loss = accumulate(heads_loss, lw.cd, l);
    }
    if (w.ci) {
        const Tensor l = loss_ci(s.bundle, f_ci, batch.y);
        report.l_ci = l.item();
        heads_loss = accumulate(heads_loss, lw.ci, l);
    }
    if (rho_cd || rho_ci) {
        const Tensor l = loss_d(s.bundle, f_cd, f_ci, batch.y, rho_cd ? &*rho_cd : nullptr, rho_ci ? &*rho_ci : nullptr);
        report.l_d = l.item();
        heads_loss = accumulate(heads_loss, lw.d, l);
    }
    check_finite(heads_loss.item(), "head-phase loss", s);
    apply(s, model::Group::heads, heads_loss, nullptr);

    const std::mt19937_64 masks = s.rng;
    model::ForwardContext second{ad::Mode::train, &s.rng, true};
    const model::Features f = model::forward_features(s.bundle, batch.x, second);

    Tensor ext_loss;
    if (w.discovery_in_extractor_phase) {
        const Tensor l = loss_d(s.bundle, f.cd, f.ci, batch.y, rho_cd ? &*rho_cd : nullptr, rho_ci ? &*rho_ci : nullptr);
        ext_loss = accumulate(ext_loss, lw.d, l);
    } else {
        ext_loss = extractor_objective(s, batch, f, report);
    }
    check_finite(ext_loss.item(), "extractor-phase loss", s);

    const bool is_meta = s.config.variant == Variant::meta;
    if (is_meta && (s.config.gamma > 0.0 || s.config.track_meta_cosine)) {
        const meta::DomainSplit split = meta::split_domains(s.config.k, s.meta_rng);
        meta::MetaBatch mb{batch.x, batch.y, *rho_cd, rho_ci, masks, true};
        const meta::MetaTerm term =
            meta::meta_term(s.bundle, mb, split, s.config.gamma, s.config.alpha, s.config.meta_hvp);
        report.meta_cosine = term.cosine;
        if (s.config.gamma > 0.0) {
            report.l_meta = term.value;
            check_finite(term.value, "meta loss", s);
            apply(s, model::Group::extractors, ext_loss, &term.grads);
            return report;
        }
    }
    apply(s, model::Group::extractors, ext_loss, nullptr);
    return report;
}

Tensor predict(model::ModelBundle& bundle, const Tensor& x) {
    if (!bundle.R_g_cd) throw ContractError("predict: bundle has no global cd head");
    ad::NoGradGuard no_grad;
    const model::Features f = model::forward_features(bundle, x);
    return model::head_forward(*bundle.R_g_cd, f.cd);
}

FitResult fit(const data::GcldrDataset& dataset, const TrainConfig& config) {
    config.validate();
    const auto train_rows = dataset.rows_with(data::Role::train);
    if (train_rows.size() < 2) throw ConfigError("fit: need at least two training rows");
    const std::size_t c = dataset.class_count();
    const auto train_labels = dataset.labels(train_rows);
    TrainState s = init_training(config, dataset.d, estimate_prior(train_labels, c));

    FitResult result;
    result.split = data::split_validation(dataset.rows_with(data::Role::test), config.val_fraction, config.seed);
    const Tensor x_val = result.split.val.empty() ? Tensor{} : dataset.features(result.split.val);
    const auto y_val = dataset.labels(result.split.val);
    const double tau = config.tau > 0.0 ? config.tau : eval::default_tau(c);

    std::vector<std::size_t> order(train_rows);
    double best_auc = -1.0;
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), s.rng);
        HistoryRow row;
        row.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t start = 0; start + 2 <= order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            if (end - start < 2) break;
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Batch batch{dataset.features(idx), dataset.labels(idx)};
            const StepReport r = train_step(s, batch);
            row.l_cd += r.l_cd;
            row.l_ci += r.l_ci;
            row.l_ac += r.l_ac;
            row.l_d += r.l_d;
            row.l_u += r.l_u;
            row.l_meta += r.l_meta;
            row.meta_cosine += r.meta_cosine;
            ++batches;
        }
        const double nb = static_cast<double>(std::max<std::size_t>(batches, 1));
        for (double* v : {&row.l_cd, &row.l_ci, &row.l_ac, &row.l_d, &row.l_u, &row.l_meta, &row.meta_cosine}) *v /= nb;
        if (x_val.defined()) {
            const auto rep = eval::metrics(eval::predict_variant(s.bundle, config.variant, x_val), y_val, tau);
            row.val_aauc = rep.aauc;
            row.val_acc1 = rep.acc1;
        }
        result.history.push_back(row);
        if (config.patience > 0 && x_val.defined()) {
            if (row.val_aauc > best_auc) {
                best_auc = row.val_aauc;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
    }
    result.bundle = std::move(s.bundle);
    return result;
}

}  // namespace gcldr::train
