// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/density.hpp"
#include "egogs/error.hpp"
#include "egogs/geometry.hpp"
#include "egogs/optimizer.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace egogs {
namespace {

GaussianCloud single(double logit = 0.0) {
    GaussianCloud c;
    c.push_back(Vec3(0.1, -0.2, 2.0), Vec3(-3, -3, -3), Vec4(1, 0, 0, 0), logit, Vec3(0.5, 0.5, 0.5), 0.0);
    return c;
}

TEST(Adam, ZeroGradientLeavesParameters) {
    GaussianCloud c = single();
    const GaussianCloud before = c;
    OptimizerState s(1, FieldRates{});
    adam_step(c, CloudGradients(1), s);
    EXPECT_EQ(c, before);
    EXPECT_EQ(s.iteration, 1);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
    GaussianCloud c = single();
    OptimizerState s(1, FieldRates{});
    CloudGradients g(1);
    g.positions[0] = Vec3(3.0, -0.02, 0.0);
    g.opacity_logits[0] = -7.0;
    g.labels[0] = 1e-3;
    const GaussianCloud before = c;
    adam_step(c, g, s);
    const double lr = s.rates.position;
    EXPECT_NEAR(c.positions[0].x() - before.positions[0].x(), -lr, 1e-12);
    EXPECT_NEAR(c.positions[0].y() - before.positions[0].y(), lr, 1e-12);
    EXPECT_EQ(c.positions[0].z(), before.positions[0].z());
    EXPECT_NEAR(c.opacity_logits[0] - before.opacity_logits[0], s.rates.opacity, 1e-12);
    EXPECT_NEAR(c.labels[0] - before.labels[0], -s.rates.label, 1e-12);
    // Moments after one step.
    EXPECT_NEAR(s.m[0][0], 0.1 * 3.0, 1e-15);
    EXPECT_NEAR(s.v[0][0], 0.001 * 9.0, 1e-15);
}

TEST(Adam, ConstantGradientKeepsUnitSteps) {
    GaussianCloud c = single();
    OptimizerState s(1, FieldRates{});
    CloudGradients g(1);
    g.labels[0] = 0.5;
    for (int i = 0; i < 10; ++i) adam_step(c, g, s);
    EXPECT_NEAR(c.labels[0], -10 * s.rates.label, 1e-10);
}

TEST(Adam, FrozenFieldsUntouched) {
    GaussianCloud c = single();
    OptimizerState s(1, FieldRates::labels_only(0.1));
    CloudGradients g(1);
    g.positions[0] = Vec3(1, 1, 1);
    g.colors[0] = Vec3(1, 1, 1);
    g.labels[0] = 1.0;
    const GaussianCloud before = c;
    adam_step(c, g, s);
    EXPECT_EQ(c.positions, before.positions);
    EXPECT_EQ(c.colors, before.colors);
    EXPECT_NE(c.labels, before.labels);
    EXPECT_EQ(s.steps[0], 0);
}

TEST(Adam, RenormalizesQuaternionsAndClampsColors) {
    GaussianCloud c = single();
    c.colors[0] = Vec3(0.9999, 0.0001, 0.5);
    OptimizerState s(1, FieldRates{0, 0, 0.5, 0, 0.5, 0});
    CloudGradients g(1);
    g.rotations[0] = Vec4(-1, 2, 0, 0);
    g.colors[0] = Vec3(-1, 1, 0);
    adam_step(c, g, s);
    EXPECT_NEAR(c.rotations[0].norm(), 1.0, 1e-14);
    EXPECT_EQ(c.colors[0].x(), 1.0);
    EXPECT_EQ(c.colors[0].y(), 0.0);
}

TEST(Adam, NonFiniteGradientAborts) {
    GaussianCloud c = single();
    OptimizerState s(1, FieldRates{});
    CloudGradients g(1);
    g.log_scales[0].y() = std::numeric_limits<double>::quiet_NaN();
    const GaussianCloud before = c;
    try {
        adam_step(c, g, s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Divergence);
    }
    EXPECT_EQ(c, before);
}

TEST(Adam, SizeMismatchIsContractViolation) {
    GaussianCloud c = single();
    OptimizerState s(2, FieldRates{});
    EXPECT_THROW(adam_step(c, CloudGradients(1), s), Error);
}

TEST(LearningRate, ExponentialDecayEndpoints) {
    EXPECT_DOUBLE_EQ(exponential_lr(1.6e-4, 1.6e-6, 0, 100), 1.6e-4);
    EXPECT_NEAR(exponential_lr(1.6e-4, 1.6e-6, 100, 100), 1.6e-6, 1e-18);
    EXPECT_NEAR(exponential_lr(1.6e-4, 1.6e-6, 50, 100), 1.6e-5, 1e-17);
    EXPECT_NEAR(exponential_lr(1.6e-4, 1.6e-6, 500, 100), 1.6e-6, 1e-18);
}

OptimizerState with_stats(const GaussianCloud &c, const std::vector<double> &mean_grad) {
    OptimizerState s(c.size(), FieldRates{});
    for (std::size_t i = 0; i < c.size(); ++i) {
        s.grad_accum[i] = 2 * mean_grad[i];
        s.grad_count[i] = 2;
    }
    return s;
}

TEST(Densify, PrunesTransparent) {
    GaussianCloud c = single(inverse_sigmoid(0.001));
    c.append(single(inverse_sigmoid(0.5)));
    OptimizerState s = with_stats(c, {0.0, 0.0});
    std::mt19937_64 rng(1);
    const auto st = densify_and_prune(c, s, DensifyThresholds{}, rng);
    EXPECT_EQ(st.pruned, 1u);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_NEAR(c.opacity(0), 0.5, 1e-12);
    EXPECT_EQ(s.size(), 1u);
}

TEST(Densify, SplitMakesTwoChildrenInsideOneSigma) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        GaussianCloud c;
        const Vec4 q = testing::random_quat(rng);
        const Vec3 ls(std::log(0.2), std::log(0.05), std::log(0.1));
        c.push_back(Vec3(0.3, 0.2, 1.0), ls, q, 1.0, Vec3(0.2, 0.4, 0.6), 0.3);
        OptimizerState s = with_stats(c, {1.0});
        const auto st = densify_and_prune(c, s, DensifyThresholds{}, rng);
        ASSERT_EQ(st.split, 1u);
        ASSERT_EQ(c.size(), 2u);
        ASSERT_EQ(s.size(), 2u);
        const Mat3 r = quat_to_rotmat(q);
        const Vec3 sigma = ls.array().exp();
        for (std::size_t i = 0; i < 2; ++i) {
            const Vec3 local = r.transpose() * (c.positions[i] - Vec3(0.3, 0.2, 1.0));
            EXPECT_LE(local.cwiseQuotient(sigma).norm(), 1.0 + 1e-12);
            EXPECT_NEAR((c.scale(i) - sigma / 1.6).norm(), 0.0, 1e-12);
            EXPECT_TRUE((c.scale(i).array() > 0).all());
            EXPECT_EQ(c.colors[i], Vec3(0.2, 0.4, 0.6));
            EXPECT_EQ(c.labels[i], 0.3);
        }
        for (const auto &m : s.m)
            for (double x : m) EXPECT_EQ(x, 0.0);
    }
}

TEST(Densify, CloneSmallGaussian) {
    GaussianCloud c = single(1.0); // scale e^-3 ~ 0.05 > 0.01 by default, so raise the clone bound
    OptimizerState s = with_stats(c, {1.0});
    s.m[0][0] = 0.7;
    std::mt19937_64 rng(3);
    DensifyThresholds th;
    th.dense_size = 0.1;
    const auto st = densify_and_prune(c, s, th, rng);
    EXPECT_EQ(st.cloned, 1u);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c.positions[0], c.positions[1]);
    EXPECT_EQ(s.m[0][0], 0.7);
    EXPECT_EQ(s.m[0][3], 0.0);
    EXPECT_EQ(s.grad_accum[0], 0.0);
}

TEST(Densify, NothingOverThresholdLeavesCloud) {
    std::mt19937_64 rng(4);
    GaussianCloud c = testing::random_cloud(rng, 30, 1.0, 3.0, 0.5, 0.01, 0.05);
    const GaussianCloud before = c;
    OptimizerState s = with_stats(c, std::vector<double>(30, 1e-5));
    densify_and_prune(c, s, DensifyThresholds{}, rng);
    EXPECT_EQ(c, before);
}

TEST(Densify, BudgetCapsGrowth) {
    std::mt19937_64 rng(5);
    GaussianCloud c = testing::random_cloud(rng, 30, 1.0, 3.0, 0.5, 0.01, 0.05);
    OptimizerState s = with_stats(c, std::vector<double>(30, 1.0));
    DensifyThresholds th;
    th.max_gaussians = 35;
    densify_and_prune(c, s, th, rng);
    EXPECT_LE(c.size(), 35u);
    EXPECT_EQ(c.size(), s.size());
}

TEST(Densify, OptimizerRowsFollowCloudThroughRandomEdits) {
    std::mt19937_64 rng(6);
    GaussianCloud c = testing::random_cloud(rng, 60, 1.0, 3.0, 0.5, 0.005, 0.08, 0.001, 0.9);
    std::uniform_real_distribution<double> u(0.0, 4e-4);
    for (int round = 0; round < 5; ++round) {
        std::vector<double> g(c.size());
        for (auto &x : g) x = u(rng);
        OptimizerState s = with_stats(c, g);
        // Tag each row's moment with the Gaussian's label to check they move together.
        for (std::size_t i = 0; i < c.size(); ++i) {
            c.labels[i] = static_cast<double>(i + 1);
            s.m[5][i] = static_cast<double>(i + 1);
        }
        densify_and_prune(c, s, DensifyThresholds{}, rng);
        ASSERT_EQ(c.size(), s.size());
        ASSERT_TRUE(c.consistent());
        for (std::size_t i = 0; i < c.size(); ++i)
            if (s.m[5][i] != 0.0) EXPECT_EQ(s.m[5][i], c.labels[i]);
    }
}

TEST(PruneTransparent, Examples) {
    GaussianCloud empty;
    EXPECT_EQ(prune_transparent(empty, 0.5), 0u);
    std::mt19937_64 rng(7);
    GaussianCloud c = testing::random_cloud(rng, 40, 1.0, 3.0, 0.5, 0.01, 0.05, 0.01, 0.99);
    const GaussianCloud before = c;
    EXPECT_EQ(prune_transparent(c, 0.0), 0u);
    EXPECT_EQ(c, before);
    OptimizerState s(c.size(), FieldRates{});
    prune_transparent(c, 0.5, &s);
    EXPECT_EQ(c.size(), s.size());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_GE(c.opacity(i), 0.5);
}

TEST(Training, FixedSizeWithoutDensification) {
    std::mt19937_64 rng(8);
    GaussianCloud c = testing::random_cloud(rng, 25, 1.0, 3.0, 0.5, 0.02, 0.1);
    const Camera cam = testing::axis_camera(32, 32, 30.0);
    OptimizerState s(c.size(), FieldRates{});
    for (int it = 0; it < 30; ++it) {
        const RenderOutput out = render_cloud(c, cam);
        RenderGrads rg;
        rg.color = Image(out.width, out.height, 3);
        for (std::size_t k = 0; k < rg.color.data.size(); ++k)
            rg.color.data[k] = 0.01 * std::sin(static_cast<double>(it + k));
        adam_step(c, render_backward(c, cam, out, rg), s);
        EXPECT_EQ(c.size(), 25u);
    }
}

} // namespace
} // namespace egogs
