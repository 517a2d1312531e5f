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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/data/dataset.hpp"
#include "gcldr/errors.hpp"
#include "gcldr/ldd/ldd.hpp"
#include "gcldr/train/losses.hpp"
#include "gcldr/train/trainer.hpp"

using namespace gcldr;
using ad::Tensor;

namespace {

train::TrainConfig tiny_config(train::Variant v = train::Variant::full) {
    train::TrainConfig cfg;
    cfg.variant = v;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.lr = 0.01;
    cfg.p_width = 16;
    cfg.g_width = 8;
    cfg.seed = 11;
    return cfg;
}

train::Batch random_batch(std::size_t b, std::size_t d, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> x(b * d);
    for (auto& v : x) v = nd(rng);
    std::vector<std::size_t> y(b);
    for (std::size_t i = 0; i < b; ++i) y[i] = i % c;
    return {Tensor::from({b, d}, std::move(x)), std::move(y)};
}

// Two Gaussian blobs far apart: linearly separable.
train::Batch separable_batch(std::size_t b, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.2);
    std::vector<double> x(b * d);
    std::vector<std::size_t> y(b);
    for (std::size_t i = 0; i < b; ++i) {
        y[i] = i % 2;
        for (std::size_t j = 0; j < d; ++j) x[i * d + j] = nd(rng) + (y[i] ? 1.5 : -1.5);
    }
    return {Tensor::from({b, d}, std::move(x)), std::move(y)};
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& ts) {
    std::vector<std::vector<double>> out;
    for (const auto& t : ts) out.emplace_back(t.values().begin(), t.values().end());
    return out;
}

train::ClassPrior uniform_prior(std::size_t c) { return {std::vector<double>(c, 1.0 / c)}; }

data::GcldrDataset small_dataset(std::uint64_t seed) {
    data::GenerateParams gp{4, 6, 24, 0.3};
    return data::generate(data::SplitSpec::two_sets(4), {}, gp, seed);
}

}  // namespace

TEST(ClassPrior, FrequenciesOfLabels) {
    std::vector<std::size_t> y{0, 0, 1};
    auto p = train::estimate_prior(y);
    ASSERT_EQ(p.p.size(), 2u);
    EXPECT_NEAR(p.p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p.p[1], 1.0 / 3.0, 1e-15);
}

TEST(ClassPrior, BalancedIsUniformAndOrderFree) {
    std::vector<std::size_t> y{0, 1, 2, 3, 0, 1, 2, 3};
    auto p = train::estimate_prior(y);
    for (double v : p.p) EXPECT_DOUBLE_EQ(v, 0.25);
    std::vector<std::size_t> z{2, 0, 0, 1, 0, 1};
    auto a = train::estimate_prior(z);
    std::mt19937_64 rng(1);
    std::shuffle(z.begin(), z.end(), rng);
    EXPECT_EQ(a.p, train::estimate_prior(z).p);
    std::vector<std::size_t> with_absent{0, 0};
    EXPECT_EQ(train::estimate_prior(with_absent, 3).p, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Losses, CiMatchesCdWithSameHeadAndUniformIsLogC) {
    auto b = model::build_bundle({6, 4, 2, 16, 8, 0.5}, 3);
    auto ps = b.R_g_cd->parameters();
    auto pt = b.R_g_ci->parameters();
    for (std::size_t i = 0; i < ps.size(); ++i)
        std::copy(ps[i].values().begin(), ps[i].values().end(), pt[i].values_mut().begin());
    auto batch = random_batch(5, 6, 4, 1);
    auto f = model::forward_features(b, batch.x);
    EXPECT_EQ(train::loss_cd(b, f.cd, batch.y).item(), train::loss_ci(b, f.cd, batch.y).item());

    for (auto& t : b.R_g_ci->parameters()) std::fill(t.values_mut().begin(), t.values_mut().end(), 0.0);
    EXPECT_NEAR(train::loss_ci(b, f.ci, batch.y).item(), std::log(4.0), 1e-12);
}

TEST(Losses, CiGradientReachesOnlyItsHead) {
    auto b = model::build_bundle({6, 3, 2, 16, 8, 0.5}, 4);
    auto batch = random_batch(4, 6, 3, 2);
    Tensor f_ci = model::forward_features(b, batch.x).ci.clone(true);
    auto params = model::all_parameters(b);
    params.push_back(f_ci);
    auto g = ad::gradients(train::loss_ci(b, f_ci, batch.y), params);
    std::set<const ad::Node*> head;
    for (auto& t : b.R_g_ci->parameters()) head.insert(t.node());
    bool head_moved = false;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const bool nonzero = std::any_of(g[p].begin(), g[p].end(), [](double v) { return v != 0.0; });
        if (head.count(params[p].node()))
            head_moved = head_moved || nonzero;
        else
            EXPECT_FALSE(nonzero) << "parameter " << p;
    }
    EXPECT_TRUE(head_moved);
}

TEST(Losses, ClassPriorTermArithmetic) {
    auto b = model::build_bundle({6, 2, 2, 16, 8, 0.5}, 5);
    auto& layer = b.R_g_ci->layers()[0];
    std::fill(layer.weight.values_mut().begin(), layer.weight.values_mut().end(), 0.0);
    layer.bias.values_mut()[0] = 0.0;
    layer.bias.values_mut()[1] = -1e6;
    auto batch = random_batch(3, 6, 2, 3);
    auto f = model::forward_features(b, batch.x);
    EXPECT_NEAR(train::loss_ac(b, f.ci, uniform_prior(2)).item(), 0.25, 1e-15);

    layer.bias.values_mut()[1] = 0.0;
    EXPECT_NEAR(train::loss_ac(b, f.ci, uniform_prior(2)).item(), 0.0, 1e-15);
}

TEST(Losses, ClassPriorTermIsPermutationInvariant) {
    auto b = model::build_bundle({6, 3, 2, 16, 8, 0.5}, 6);
    auto batch = random_batch(6, 6, 3, 4);
    auto f = model::forward_features(b, batch.x);
    train::ClassPrior prior{{0.5, 0.3, 0.2}};
    const double a = train::loss_ac(b, f.ci, prior).item();
    std::vector<double> rev(f.ci.size());
    const std::size_t h = f.ci.cols();
    for (std::size_t i = 0; i < 6; ++i)
        std::copy_n(f.ci.values().begin() + (5 - i) * h, h, rev.begin() + i * h);
    EXPECT_NEAR(train::loss_ac(b, Tensor::from({6, h}, rev), prior).item(), a, 1e-15);
}

TEST(Losses, DiscoveryAndUnificationSumOverSpaces) {
    auto b = model::build_bundle({6, 3, 2, 16, 8, 0.5}, 7);
    auto batch = random_batch(5, 6, 3, 5);
    auto f = model::forward_features(b, batch.x);
    auto hcd = ldd::ldd_heads(b, model::Space::cd);
    auto hci = ldd::ldd_heads(b, model::Space::ci);
    auto rcd = ldd::compute_posteriors(hcd, f.cd, batch.y);
    auto rci = ldd::compute_posteriors(hci, f.ci, batch.y);
    const double d_cd = ldd::discovery_loss(hcd, f.cd, batch.y, rcd).item();
    const double d_ci = ldd::discovery_loss(hci, f.ci, batch.y, rci).item();
    EXPECT_EQ(train::loss_d(b, f.cd, f.ci, batch.y, &rcd, &rci).item(), d_cd + d_ci);
    EXPECT_EQ(train::loss_d(b, f.cd, f.ci, batch.y, &rcd, nullptr).item(), d_cd);

    const double u_cd = ldd::elimination_loss(hcd, f.cd, batch.y).item();
    const double u_ci = ldd::elimination_loss(hci, f.ci, batch.y).item();
    EXPECT_EQ(train::loss_u(b, f.cd, f.ci, batch.y).item(), u_cd + u_ci);
    EXPECT_EQ(train::loss_u(b, f.cd, Tensor{}, batch.y).item(), u_cd);
    EXPECT_GE(u_cd, 0.0);
    EXPECT_GE(u_ci, 0.0);
}

TEST(TrainStep, HeadPhaseLeavesExtractorsUnchanged) {
    auto batch = random_batch(8, 6, 3, 6);
    auto s = train::init_training(tiny_config(), 6, uniform_prior(3));
    s.extractors_opt.config.lr = 0.0;
    auto ext = snapshot(model::select_group(s.bundle, model::Group::extractors));
    auto heads = snapshot(model::select_group(s.bundle, model::Group::heads));
    train::train_step(s, batch);
    EXPECT_EQ(snapshot(model::select_group(s.bundle, model::Group::extractors)), ext);
    EXPECT_NE(snapshot(model::select_group(s.bundle, model::Group::heads)), heads);
}

TEST(TrainStep, ExtractorPhaseLeavesHeadsUnchanged) {
    auto batch = random_batch(8, 6, 3, 7);
    auto s = train::init_training(tiny_config(), 6, uniform_prior(3));
    s.heads_opt.config.lr = 0.0;
    auto ext = snapshot(model::select_group(s.bundle, model::Group::extractors));
    auto heads = snapshot(model::select_group(s.bundle, model::Group::heads));
    train::train_step(s, batch);
    EXPECT_EQ(snapshot(model::select_group(s.bundle, model::Group::heads)), heads);
    EXPECT_NE(snapshot(model::select_group(s.bundle, model::Group::extractors)), ext);
}

TEST(TrainStep, RunningStatisticsMoveOnceFromTheSecondForward) {
    auto batch = random_batch(10, 6, 3, 8);
    auto s = train::init_training(tiny_config(), 6, uniform_prior(3));
    auto pre = ad::matmul(batch.x, s.bundle.P.layers()[0].weight);
    train::train_step(s, batch);
    const auto& bn = s.bundle.P.layers()[1];
    for (std::size_t j = 0; j < pre.cols(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < 10; ++i) m += pre.at(i, j);
        EXPECT_NEAR(bn.running_mean[j], 0.1 * m / 10.0, 1e-12);
    }
}

TEST(TrainStep, SeparableToyDrivesCrossEntropyDown) {
    auto batch = separable_batch(32, 4, 9);
    for (auto v : {train::Variant::direct, train::Variant::full}) {
        auto cfg = tiny_config(v);
        cfg.p_dropout = 0.0;
        auto s = train::init_training(cfg, 4, uniform_prior(2));
        train::StepReport last;
        for (int i = 0; i < 200; ++i) last = train::train_step(s, batch);
        EXPECT_LT(last.l_cd, 0.1) << train::to_string(v);

        auto probs = train::predict(s.bundle, batch.x);
        std::size_t right = 0;
        for (std::size_t i = 0; i < 32; ++i) right += (probs.at(i, 1) > probs.at(i, 0)) == (batch.y[i] == 1);
        EXPECT_GE(right, 31u) << train::to_string(v);
    }
}

TEST(TrainStep, SingleRowBatchIsRejected) {
    auto s = train::init_training(tiny_config(), 6, uniform_prior(3));
    EXPECT_THROW(train::train_step(s, random_batch(1, 6, 3, 0)), DegenerateBatchError);
}

TEST(TrainStep, NanParameterIsDivergence) {
    auto s = train::init_training(tiny_config(), 6, uniform_prior(3));
    s.bundle.R_g_cd->layers()[0].bias.values_mut()[0] = std::nan("");
    EXPECT_THROW(train::train_step(s, random_batch(8, 6, 3, 1)), DivergenceError);
}

TEST(TrainStep, ClassConfuseNeverEvaluatesDomainLosses) {
    auto s = train::init_training(tiny_config(train::Variant::class_confuse), 6, uniform_prior(3));
    auto r = train::train_step(s, random_batch(8, 6, 3, 2));
    EXPECT_EQ(r.l_d, 0.0);
    EXPECT_EQ(r.l_u, 0.0);
    EXPECT_GT(r.l_ac, 0.0);
}

TEST(Predict, RowsSumToOneAndRepeat) {
    auto s = train::init_training(tiny_config(), 6, uniform_prior(3));
    auto x = random_batch(7, 6, 3, 3).x;
    auto a = train::predict(s.bundle, x);
    auto b = train::predict(s.bundle, x);
    EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(a.at(i, 0) + a.at(i, 1) + a.at(i, 2), 1.0, 1e-12);
}

TEST(Fit, HistoryHasOneRowPerEpochAndIsDeterministic) {
    auto ds = small_dataset(1);
    auto cfg = tiny_config();
    auto a = train::fit(ds, cfg);
    auto b = train::fit(ds, cfg);
    ASSERT_EQ(a.history.size(), cfg.epochs);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        EXPECT_EQ(a.history[e].epoch, e + 1);
        EXPECT_EQ(a.history[e].l_cd, b.history[e].l_cd);
        EXPECT_EQ(a.history[e].val_aauc, b.history[e].val_aauc);
    }
    EXPECT_EQ(snapshot(model::all_parameters(a.bundle)), snapshot(model::all_parameters(b.bundle)));
}

TEST(Fit, MetaWithZeroGammaIsTheFullTrajectory) {
    auto ds = small_dataset(2);
    auto full = tiny_config(train::Variant::full);
    auto meta = tiny_config(train::Variant::meta);
    meta.gamma = 0.0;
    auto a = train::fit(ds, full);
    auto b = train::fit(ds, meta);
    EXPECT_EQ(snapshot(model::all_parameters(a.bundle)), snapshot(model::all_parameters(b.bundle)));
}

TEST(TrainConfig, RejectsInvalidValues) {
    auto cfg = tiny_config();
    cfg.batch_size = 1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.gamma = -1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.epochs = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(train::parse_variant("ours"), ConfigError);
}
