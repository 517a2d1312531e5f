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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gcldr/autodiff/gradcheck.hpp"
#include "gcldr/errors.hpp"
#include "gcldr/meta/meta.hpp"
#include "gcldr/train/trainer.hpp"

using namespace gcldr;
using ad::Tensor;

namespace {

struct Setup {
    model::ModelBundle bundle;
    meta::MetaBatch batch;
};

Setup make_setup(std::uint64_t seed, bool dropout = true, std::size_t b = 6) {
    auto bundle = model::build_bundle({8, 3, 2, 16, 8, 0.5}, seed);
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> nd;
    std::vector<double> x(b * 8);
    for (auto& v : x) v = nd(rng);
    std::vector<std::size_t> y(b);
    for (std::size_t i = 0; i < b; ++i) y[i] = i % 3;
    Tensor xt = Tensor::from({b, 8}, x);
    auto f = model::forward_features(bundle, xt);
    auto rcd = ldd::compute_posteriors(ldd::ldd_heads(bundle, model::Space::cd), f.cd, y);
    auto rci = ldd::compute_posteriors(ldd::ldd_heads(bundle, model::Space::ci), f.ci, y);
    meta::MetaBatch mb{xt, y, rcd, rci, std::mt19937_64(seed + 200), dropout};
    return {std::move(bundle), std::move(mb)};
}

model::Features replayed(Setup& s) {
    std::mt19937_64 rng = s.batch.masks;
    model::ForwardContext ctx{ad::Mode::train, &rng, false, s.batch.dropout};
    return model::forward_features(s.bundle, s.batch.x, ctx);
}

void copy_params(const model::Network& from, model::Network& to) {
    auto a = from.parameters();
    auto b = to.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) std::copy(a[i].values().begin(), a[i].values().end(), b[i].values_mut().begin());
}

const meta::DomainSplit kTwo{{0}, {1}};

}  // namespace

TEST(SplitDomains, TwoDomainsHaveOneBipartition) {
    std::mt19937_64 rng(0);
    for (int i = 0; i < 100; ++i) {
        auto s = meta::split_domains(2, rng);
        ASSERT_EQ(s.s1.size(), 1u);
        ASSERT_EQ(s.s2.size(), 1u);
        EXPECT_NE(s.s1[0], s.s2[0]);
    }
    EXPECT_THROW(meta::split_domains(1, rng), ConfigError);
}

TEST(SplitDomains, FourDomainsAreBalancedDisjointAndCovering) {
    std::mt19937_64 rng(1);
    std::vector<std::size_t> in_s1(4, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto s = meta::split_domains(4, rng);
        ASSERT_FALSE(s.s1.empty());
        ASSERT_FALSE(s.s2.empty());
        std::vector<int> seen(4, 0);
        for (auto r : s.s1) ++seen[r], ++in_s1[r];
        for (auto r : s.s2) ++seen[r];
        for (int v : seen) ASSERT_EQ(v, 1);
    }
    for (auto n : in_s1) EXPECT_NEAR(static_cast<double>(n) / draws, 0.5, 0.05);
}

TEST(MergedSoftLoss, SumsBothSpaces) {
    auto s = make_setup(1);
    auto f = replayed(s);
    for (std::size_t r = 0; r < 2; ++r) {
        const double cd = ldd::soft_domain_loss(ldd::ldd_heads(s.bundle, model::Space::cd), f.cd, s.batch.y,
                                                s.batch.rho_cd, r).item();
        const double ci = ldd::soft_domain_loss(ldd::ldd_heads(s.bundle, model::Space::ci), f.ci, s.batch.y,
                                                *s.batch.rho_ci, r).item();
        EXPECT_EQ(meta::merged_soft_loss(s.bundle, s.batch, r).item(), cd + ci);
    }
}

TEST(MergedSoftLoss, SumOverDomainsIsRecognitionPartOfDiscovery) {
    auto s = make_setup(2);
    auto f = replayed(s);
    double expect = 0.0;
    for (auto space : {model::Space::cd, model::Space::ci}) {
        const auto& feat = space == model::Space::cd ? f.cd : f.ci;
        const auto& rho = space == model::Space::cd ? s.batch.rho_cd : *s.batch.rho_ci;
        auto lik = ldd::local_likelihood(ldd::ldd_heads(s.bundle, space), feat, s.batch.y);
        for (std::size_t i = 0; i < rho.b; ++i)
            for (std::size_t r = 0; r < 2; ++r) expect -= rho(i, r) * std::log(lik.at(i, r)) / rho.b;
    }
    const double got = meta::merged_soft_loss(s.bundle, s.batch, 0).item() +
                       meta::merged_soft_loss(s.bundle, s.batch, 1).item();
    EXPECT_NEAR(got, expect, 1e-12);
}

TEST(MergedSoftLoss, ZeroWeightDomainIsZero) {
    auto s = make_setup(3);
    for (std::size_t i = 0; i < s.batch.rho_cd.b; ++i) {
        s.batch.rho_cd.rho[i * 2] = 0.0;
        s.batch.rho_cd.rho[i * 2 + 1] = 1.0;
        s.batch.rho_ci->rho[i * 2] = 0.0;
        s.batch.rho_ci->rho[i * 2 + 1] = 1.0;
    }
    EXPECT_EQ(meta::merged_soft_loss(s.bundle, s.batch, 0).item(), 0.0);
}

TEST(MetaGradients, SymmetricDomainsGiveEqualGradients) {
    auto s = make_setup(4);
    copy_params(s.bundle.R_l_cd[0], s.bundle.R_l_cd[1]);
    copy_params(s.bundle.R_l_ci[0], s.bundle.R_l_ci[1]);
    std::fill(s.batch.rho_cd.rho.begin(), s.batch.rho_cd.rho.end(), 0.5);
    std::fill(s.batch.rho_ci->rho.begin(), s.batch.rho_ci->rho.end(), 0.5);
    auto g = meta::meta_gradients(s.bundle, s.batch, kTwo);
    EXPECT_EQ(g.g1, g.g2);
    EXPECT_NEAR(meta::cosine(g.g1, g.g2), 1.0, 1e-12);
}

TEST(MetaGradients, MatchFiniteDifferencesAndExtractorDimension) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto s = make_setup(10 + seed);
        auto g = meta::meta_gradients(s.bundle, s.batch, kTwo);
        auto params = model::select_group(s.bundle, model::Group::extractors);
        std::size_t n = 0;
        for (auto& p : params) n += p.size();
        EXPECT_EQ(g.g1.size(), n);
        EXPECT_EQ(g.g2.size(), n);
        std::vector<std::size_t> s1{0}, s2{1};
        EXPECT_LE(ad::finite_diff_check([&] { return meta::set_loss(s.bundle, s.batch, s1); }, params), 1e-4);
        EXPECT_LE(ad::finite_diff_check([&] { return meta::set_loss(s.bundle, s.batch, s2); }, params), 1e-4);
    }
}

TEST(MetaLoss, ZeroStepCollapsesToUnperturbedMean) {
    auto s = make_setup(5);
    const double gamma = 0.01;
    const double mean = 0.5 * gamma *
                        (meta::merged_soft_loss(s.bundle, s.batch, 0).item() +
                         meta::merged_soft_loss(s.bundle, s.batch, 1).item());
    EXPECT_NEAR(meta::meta_loss_exact(s.bundle, s.batch, kTwo, gamma, 0.0), mean, 1e-15);
    EXPECT_EQ(meta::meta_loss_exact(s.bundle, s.batch, kTwo, gamma, 0.0),
              meta::meta_loss_approx(s.bundle, s.batch, kTwo, gamma, 0.0));
    EXPECT_NEAR(meta::meta_term(s.bundle, s.batch, kTwo, gamma, 0.0, false).value, mean, 1e-15);
}

TEST(MetaLoss, GammaScalesLinearly) {
    auto s = make_setup(6);
    const double a = meta::meta_loss_exact(s.bundle, s.batch, kTwo, 0.01, 0.3);
    const double b = meta::meta_loss_exact(s.bundle, s.batch, kTwo, 0.02, 0.3);
    EXPECT_EQ(b, 2.0 * a);
}

TEST(MetaLoss, ParametersAreRestored) {
    auto s = make_setup(7);
    auto before = model::all_parameters(s.bundle);
    std::vector<std::vector<double>> snap;
    for (auto& t : before) snap.emplace_back(t.values().begin(), t.values().end());
    meta::meta_loss_exact(s.bundle, s.batch, kTwo, 0.01, 0.5);
    meta::meta_term(s.bundle, s.batch, kTwo, 0.01, 0.5, true);
    for (std::size_t i = 0; i < before.size(); ++i)
        EXPECT_TRUE(std::equal(snap[i].begin(), snap[i].end(), before[i].values().begin()));
}

TEST(MetaTerm, HvpGradientMatchesFiniteDifferencesOfExactLoss) {
    auto s = make_setup(8, false);
    const double gamma = 1.0, alpha = 0.2;
    auto term = meta::meta_term(s.bundle, s.batch, kTwo, gamma, alpha, true);
    auto params = model::select_group(s.bundle, model::Group::extractors);
    // Spot-check a handful of coordinates with central differences.
    std::mt19937_64 rng(0);
    double worst = 0.0;
    for (int probe = 0; probe < 12; ++probe) {
        const std::size_t p = rng() % params.size();
        const std::size_t i = rng() % params[p].size();
        auto v = params[p].values_mut();
        const double keep = v[i], h = 1e-5;
        v[i] = keep + h;
        const double up = meta::meta_loss_exact(s.bundle, s.batch, kTwo, gamma, alpha);
        v[i] = keep - h;
        const double down = meta::meta_loss_exact(s.bundle, s.batch, kTwo, gamma, alpha);
        v[i] = keep;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(numeric - term.grads[p][i]) / std::max(1e-3, std::abs(numeric)));
    }
    EXPECT_LE(worst, 1e-3);
}

TEST(Taylor, ErrorShrinksQuadraticallyWithDropoutOff) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto s = make_setup(20 + seed, true, 12);
        std::vector<double> alphas{1e-1, 1e-2, 1e-3, 0.0};
        auto rows = meta::verify_taylor(s.bundle, s.batch, kTwo, 0.01, alphas);
        ASSERT_EQ(rows.size(), 4u);
        EXPECT_GE(rows[0].decay_ratio, 50.0);
        EXPECT_GE(rows[1].decay_ratio, 50.0);
        EXPECT_EQ(rows[3].abs_error, 0.0);
        EXPECT_TRUE(std::isnan(rows[3].decay_ratio));
    }
}

TEST(Taylor, CsvHasHeaderAndOneLinePerAlpha) {
    auto s = make_setup(30);
    std::vector<double> alphas{1e-1, 1e-2};
    auto rows = meta::verify_taylor(s.bundle, s.batch, kTwo, 0.01, alphas);
    auto path = std::filesystem::temp_directory_path() / "gcldr_taylor_test.csv";
    meta::write_taylor_csv(rows, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "alpha,exact,approx,abs_error,decay_ratio");
    int n = 0;
    while (std::getline(in, line)) ++n;
    EXPECT_EQ(n, 2);
    std::filesystem::remove(path);
}

TEST(MetaTraining, MetaTermRaisesGradientConcordance) {
    // Mean cosine(g1, g2) over the last 20 of 80 steps, averaged over 5 seeds.
    auto run = [](double gamma) {
        double total = 0.0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            train::TrainConfig cfg;
            cfg.variant = train::Variant::meta;
            cfg.gamma = gamma;
            cfg.track_meta_cosine = true;
            cfg.p_width = 16;
            cfg.g_width = 8;
            cfg.lr = 0.01;
            cfg.seed = seed;
            auto s = train::init_training(cfg, 8, {{1.0 / 3, 1.0 / 3, 1.0 / 3}});
            auto setup = make_setup(seed, true, 24);
            train::Batch batch{setup.batch.x, setup.batch.y};
            double tail = 0.0;
            for (int step = 0; step < 80; ++step) {
                auto r = train::train_step(s, batch);
                if (step >= 60) tail += r.meta_cosine;
            }
            total += tail / 20.0;
        }
        return total / 5.0;
    };
    EXPECT_GT(run(0.01), run(0.0));
}
