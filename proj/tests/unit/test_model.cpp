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
#include <random>
#include <set>

#include "gcldr/autodiff/ops.hpp"
#include "gcldr/errors.hpp"
#include "gcldr/model/bundle.hpp"
#include "gcldr/model/checkpoint.hpp"

using namespace gcldr;
using ad::Tensor;
using model::BundleDims;

namespace {

Tensor random_input(std::size_t b, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(b * d);
    for (auto& x : v) x = nd(rng);
    return Tensor::from({b, d}, std::move(v));
}

std::set<const ad::Node*> nodes_of(const std::vector<Tensor>& ts) {
    std::set<const ad::Node*> out;
    for (const auto& t : ts) out.insert(t.node());
    return out;
}

}  // namespace

TEST(Bundle, ParameterCountMatchesLayerSizes) {
    const std::size_t d = 8, c = 3, k = 2, pw = 512, gw = 128;
    auto b = model::build_bundle({d, c, k, pw, gw, 0.5}, 1);
    const std::size_t mapping = d * pw + 2 * pw;
    const std::size_t extractor = pw * gw + gw;
    const std::size_t class_head = gw * c + c;
    const std::size_t domain_head = gw * k + k;
    const std::size_t expect = mapping + 2 * extractor + (2 + 2 * k) * class_head + 2 * domain_head;
    EXPECT_EQ(model::parameter_count(b), expect);
    EXPECT_EQ(expect, 139286u);
}

TEST(Bundle, SameSeedGivesIdenticalParameters) {
    BundleDims dims{8, 3, 2, 16, 8, 0.5};
    auto a = model::all_parameters(model::build_bundle(dims, 7));
    auto b = model::all_parameters(model::build_bundle(dims, 7));
    auto c = model::all_parameters(model::build_bundle(dims, 8));
    ASSERT_EQ(a.size(), b.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(std::equal(a[i].values().begin(), a[i].values().end(), b[i].values().begin()));
        any_diff = any_diff || !std::equal(a[i].values().begin(), a[i].values().end(), c[i].values().begin());
    }
    EXPECT_TRUE(any_diff);
}

TEST(Bundle, SharedNetworksStartIdenticalAcrossLayouts) {
    BundleDims dims{8, 3, 2, 16, 8, 0.5};
    auto full = model::build_bundle(dims, 3);
    model::BundleLayout direct{false, true, false, false, false, false, false};
    auto slim = model::build_bundle(dims, 3, direct);
    auto pf = full.G_cd.parameters();
    auto ps = slim.G_cd.parameters();
    for (std::size_t i = 0; i < pf.size(); ++i)
        EXPECT_TRUE(std::equal(pf[i].values().begin(), pf[i].values().end(), ps[i].values().begin()));
    EXPECT_FALSE(slim.G_ci.has_value());
    EXPECT_TRUE(slim.R_l_cd.empty());
}

TEST(Bundle, KLocalHeadsPerSpace) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    EXPECT_EQ(b.R_l_cd.size(), 2u);
    EXPECT_EQ(b.R_l_ci.size(), 2u);
    auto b4 = model::build_bundle({8, 3, 4, 16, 8, 0.5}, 0);
    EXPECT_EQ(b4.R_l_cd.size(), 4u);
    EXPECT_EQ(b4.D_cd->spec().output_width(), 4u);
}

TEST(Bundle, InvalidDimensionsAreConfigErrors) {
    EXPECT_THROW(model::build_bundle({8, 3, 1, 16, 8, 0.5}, 0), ConfigError);
    EXPECT_THROW(model::build_bundle({8, 1, 2, 16, 8, 0.5}, 0), ConfigError);
    EXPECT_THROW(model::build_bundle({1, 3, 2, 16, 8, 0.5}, 0), ConfigError);
}

TEST(Bundle, ForwardFeatureShapesAndRange) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    auto x = random_input(5, 8, 1);
    auto f = model::forward_features(b, x);
    EXPECT_EQ(f.cd.shape(), (ad::Shape{5, 8}));
    EXPECT_EQ(f.ci.shape(), (ad::Shape{5, 8}));
    for (double v : f.cd.values()) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Bundle, InferForwardIsRepeatable) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    auto x = random_input(5, 8, 2);
    auto f1 = model::forward_features(b, x);
    auto f2 = model::forward_features(b, x);
    EXPECT_TRUE(std::equal(f1.cd.values().begin(), f1.cd.values().end(), f2.cd.values().begin()));
    EXPECT_TRUE(std::equal(f1.ci.values().begin(), f1.ci.values().end(), f2.ci.values().begin()));
}

TEST(Bundle, WrongInputWidthThrows) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    EXPECT_THROW(model::forward_features(b, random_input(4, 7, 0)), DimensionError);
}

TEST(Bundle, TrainModeDropoutNeedsRng) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    model::ForwardContext ctx{ad::Mode::train, nullptr, false, true};
    EXPECT_THROW(model::forward_features(b, random_input(4, 8, 0), ctx), ContractError);
}

TEST(Bundle, HeadRowsSumToOne) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    auto f = model::forward_features(b, random_input(6, 8, 3));
    for (auto* head : {&*b.R_g_cd, &b.R_l_ci[1], &*b.D_ci}) {
        auto p = model::head_forward(*head, head == &*b.D_ci || head == &b.R_l_ci[1] ? f.ci : f.cd);
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) s += p.at(i, j);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
    EXPECT_THROW(model::head_forward(b.G_cd, model::forward_features(b, random_input(2, 8, 0)).cd), ContractError);
}

TEST(Bundle, GroupsPartitionTheParameters) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    auto ext = nodes_of(model::select_group(b, model::Group::extractors));
    auto heads = nodes_of(model::select_group(b, model::Group::heads));
    auto all = nodes_of(model::all_parameters(b));
    for (auto* n : ext) EXPECT_EQ(heads.count(n), 0u);
    EXPECT_EQ(ext.size() + heads.size(), all.size());

    std::vector<Tensor> theta = b.P.parameters();
    for (auto& t : b.G_cd.parameters()) theta.push_back(t);
    for (auto& t : b.G_ci->parameters()) theta.push_back(t);
    EXPECT_EQ(ext, nodes_of(theta));
}

TEST(Bundle, RunningStatisticsMoveOnlyWhenRequested) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.0}, 0);
    auto x = random_input(10, 8, 4);
    std::mt19937_64 rng(0);
    auto& bn = b.P.layers()[1];
    ASSERT_EQ(bn.spec.kind, model::LayerKind::batchnorm);
    const auto before = bn.running_mean;

    model::ForwardContext frozen{ad::Mode::train, &rng, false, true};
    model::forward_features(b, x, frozen);
    EXPECT_EQ(bn.running_mean, before);

    auto pre = ad::matmul(x, b.P.layers()[0].weight);
    model::ForwardContext live{ad::Mode::train, &rng, true, true};
    model::forward_features(b, x, live);
    for (std::size_t j = 0; j < 3; ++j) {
        double m = 0.0, v = 0.0;
        for (std::size_t i = 0; i < 10; ++i) m += pre.at(i, j);
        m /= 10.0;
        for (std::size_t i = 0; i < 10; ++i) v += (pre.at(i, j) - m) * (pre.at(i, j) - m);
        v /= 9.0;
        EXPECT_NEAR(bn.running_mean[j], 0.9 * 0.0 + 0.1 * m, 1e-12);
        EXPECT_NEAR(bn.running_var[j], 0.9 * 1.0 + 0.1 * v, 1e-12);
    }
}

TEST(Checkpoint, RoundTripIsBitExact) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 5);
    for (auto& t : model::all_parameters(b))
        for (auto& v : t.values_mut()) v = v * 1.0000001 + 1e-17;
    b.P.layers()[1].running_mean[0] = 0.123456789012345678;
    auto text = model::checkpoint_to_string(b);
    auto r = model::checkpoint_from_string(text);
    auto pa = model::all_parameters(b);
    auto pb = model::all_parameters(r);
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
        EXPECT_TRUE(std::equal(pa[i].values().begin(), pa[i].values().end(), pb[i].values().begin()));
    EXPECT_EQ(r.P.layers()[1].running_mean, b.P.layers()[1].running_mean);
    EXPECT_EQ(model::checkpoint_to_string(r), text);

    auto x = random_input(3, 8, 6);
    auto fa = model::forward_features(b, x);
    auto fb = model::forward_features(r, x);
    EXPECT_TRUE(std::equal(fa.cd.values().begin(), fa.cd.values().end(), fb.cd.values().begin()));
}

TEST(Checkpoint, RejectsGarbage) {
    EXPECT_THROW(model::checkpoint_from_string("not json"), ConfigError);
    EXPECT_THROW(model::checkpoint_from_string(R"({"format":"other","version":1})"), ConfigError);
}

TEST(Bundle, CloneIsIndependent) {
    auto b = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 0);
    auto c = model::clone_bundle(b);
    const double before = model::all_parameters(b)[0].values()[0];
    model::all_parameters(c)[0].values_mut()[0] += 1.0;
    EXPECT_EQ(model::all_parameters(b)[0].values()[0], before);
}
