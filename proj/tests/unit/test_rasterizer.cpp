// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/error.hpp"
#include "egogs/rasterizer.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace egogs {
namespace {

using testing::axis_camera;
using testing::random_cloud;

ScreenSplat pixel_splat(double x, double y, double depth, double opacity, const Vec3 &color, int source) {
    ScreenSplat s;
    s.mean2d = Vec2(x, y);
    s.cov2d = Mat2::Identity() * 2.0;
    s.conic = Mat2::Identity() * 0.5;
    s.radius = 3.0 * std::sqrt(2.0);
    s.depth = depth;
    s.opacity = opacity;
    s.color = color;
    s.source = source;
    return s;
}

double max_abs_diff(const Image &a, const Image &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

TEST(Project, OnAxisGaussianLandsOnPrincipalPoint) {
    const Camera cam = axis_camera(32, 24, 40.0);
    GaussianCloud c;
    c.push_back(Vec3(0, 0, 3), Vec3::Constant(std::log(0.05)), Vec4(1, 0, 0, 0), 0.0, Vec3::Ones());
    const auto splats = project(c, cam);
    ASSERT_EQ(splats.size(), 1u);
    EXPECT_NEAR(splats[0].mean2d.x(), cam.intrinsics.cx, 1e-12);
    EXPECT_NEAR(splats[0].mean2d.y(), cam.intrinsics.cy, 1e-12);
}

// Oracle: Jacobian of the pinhole map by central differences, pushed through
// Sigma as J Sigma J^T (plus the low-pass floor).
TEST(Project, CovarianceMatchesFiniteDifferenceProjection) {
    Camera cam = axis_camera(64, 64, 50.0);
    cam.rotation = quat_to_rotmat(Vec4(0.95, 0.1, -0.2, 0.05));
    cam.translation = Vec3(0.1, -0.2, 0.3);
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
        const double s = 0.02 + 0.01 * t;
        const double d = 2.0 + 0.1 * t;
        // Place the Gaussian at depth d on a random ray.
        const Vec3 cam_pt((t % 5 - 2) * 0.1 * d, (t % 3 - 1) * 0.1 * d, d);
        const Vec3 world = cam.rotation.transpose() * (cam_pt - cam.translation);
        GaussianCloud c;
        c.push_back(world, Vec3::Constant(std::log(s)), testing::random_quat(rng), 0.0, Vec3::Ones());
        const auto splats = project(c, cam);
        ASSERT_EQ(splats.size(), 1u);
        auto pix = [&](const Vec3 &w) {
            const Vec3 p = cam.to_camera(w);
            return Vec2(cam.intrinsics.fx * p.x() / p.z() + cam.intrinsics.cx,
                        cam.intrinsics.fy * p.y() / p.z() + cam.intrinsics.cy);
        };
        Eigen::Matrix<double, 2, 3> jac;
        for (int k = 0; k < 3; ++k) {
            Vec3 dp = Vec3::Zero();
            dp[k] = 1e-6;
            jac.col(k) = (pix(world + dp) - pix(world - dp)) / 2e-6;
        }
        Mat2 expected = jac * (s * s * Mat3::Identity()) * jac.transpose();
        expected += 0.3 * Mat2::Identity();
        EXPECT_LT((splats[0].cov2d - expected).cwiseAbs().maxCoeff(), 1e-6 * expected.norm());
        if (t == 0) {
            // Isotropic case from the axis camera: diag((f s / d)^2) + blur.
            const double fs = cam.intrinsics.fx * s / cam_pt.z();
            EXPECT_NEAR(expected(0, 0), fs * fs * (1 + std::pow(cam_pt.x() / d, 2)) + 0.3, 1e-3 * fs * fs + 1e-9);
        }
    }
}

TEST(Project, IsotropicOnAxisCovariance) {
    const Camera cam = axis_camera(64, 64, 50.0);
    GaussianCloud c;
    const double s = 0.04, d = 2.5;
    c.push_back(Vec3(0, 0, d), Vec3::Constant(std::log(s)), Vec4(1, 0, 0, 0), 0.0, Vec3::Ones());
    const auto splats = project(c, cam);
    ASSERT_EQ(splats.size(), 1u);
    const double e = std::pow(50.0 * s / d, 2) + 0.3;
    EXPECT_NEAR(splats[0].cov2d(0, 0), e, 1e-12);
    EXPECT_NEAR(splats[0].cov2d(1, 1), e, 1e-12);
    EXPECT_NEAR(splats[0].cov2d(0, 1), 0.0, 1e-12);
}

TEST(Project, BehindCameraAndOffscreenAreCulled) {
    const Camera cam = axis_camera(32, 32, 30.0);
    GaussianCloud c;
    c.push_back(Vec3(0, 0, -1), Vec3::Constant(-3), Vec4(1, 0, 0, 0), 0.0, Vec3::Ones());
    c.push_back(Vec3(0, 0, 0), Vec3::Constant(-3), Vec4(1, 0, 0, 0), 0.0, Vec3::Ones());
    c.push_back(Vec3(50, 0, 1), Vec3::Constant(-3), Vec4(1, 0, 0, 0), 0.0, Vec3::Ones());
    EXPECT_TRUE(project(c, cam).empty());
}

TEST(Render, EmptyIsBlack) {
    const RenderOutput out = render({}, 20, 30);
    for (double v : out.color.data) EXPECT_EQ(v, 0.0);
    for (double v : out.alpha.data) EXPECT_EQ(v, 0.0);
    for (double v : out.label.data) EXPECT_EQ(v, 0.0);
    const RenderOutput naive = render_naive({}, 20, 30);
    for (double v : naive.alpha.data) EXPECT_EQ(v, 0.0);
}

TEST(Render, SingleOpaqueSplatClampsAt099) {
    std::vector<ScreenSplat> s{pixel_splat(5, 7, 1.0, sigmoid(40.0), Vec3(1, 0, 0), 0)};
    const RenderOutput out = render(s, 16, 16);
    EXPECT_NEAR(out.color.at(5, 7, 0), 0.99, 1e-12);
    EXPECT_EQ(out.color.at(5, 7, 1), 0.0);
    EXPECT_NEAR(out.alpha.at(5, 7), 0.99, 1e-12);
    const RenderOutput naive = render_naive(s, 16, 16);
    EXPECT_NEAR(naive.color.at(5, 7, 0), 0.99, 1e-12);
}

TEST(Render, TwoCoincidentSplatsBlendFrontToBack) {
    // Listed back first: order must come from depth, not input position.
    std::vector<ScreenSplat> s{pixel_splat(3, 3, 2.0, 0.5, Vec3(0, 0, 1), 1),
                               pixel_splat(3, 3, 1.0, 0.5, Vec3(1, 0, 0), 0)};
    const RenderOutput out = render(s, 8, 8);
    EXPECT_NEAR(out.color.at(3, 3, 0), 0.5, 1e-12);
    EXPECT_NEAR(out.color.at(3, 3, 1), 0.0, 1e-12);
    EXPECT_NEAR(out.color.at(3, 3, 2), 0.25, 1e-12);
    EXPECT_NEAR(out.alpha.at(3, 3), 0.75, 1e-12);
}

TEST(Render, TiledMatchesNaiveOnRandomScenes) {
    std::mt19937_64 rng(99);
    const Camera cam = axis_camera(64, 64, 60.0);
    for (int scene = 0; scene < 20; ++scene) {
        const GaussianCloud c = random_cloud(rng, 200, 1.0, 4.0, 1.2, 0.01, 0.15, 0.05, 0.999);
        const auto splats = project(c, cam);
        const RenderOutput a = render(splats, 64, 64);
        const RenderOutput b = render_naive(splats, 64, 64);
        EXPECT_LT(max_abs_diff(a.color, b.color), 1e-5);
        EXPECT_LT(max_abs_diff(a.alpha, b.alpha), 1e-5);
        EXPECT_LT(max_abs_diff(a.label, b.label), 1e-5);
    }
}

TEST(Render, SingleSplatMatchesClosedForm) {
    ScreenSplat s = pixel_splat(10.3, 8.6, 1.0, 0.7, Vec3(0.2, 0.4, 0.9), 0);
    const std::vector<ScreenSplat> v{s};
    const RenderOutput naive = render_naive(v, 20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            const double q = (std::pow(x - 10.3, 2) + std::pow(y - 8.6, 2)) * 0.5;
            double w = 1.0;
            if (q > 4.0) {
                const double t = std::min(1.0, (q - 4.0) / 5.0);
                w = 1.0 - t * t * (3.0 - 2.0 * t);
            }
            const double a = 0.7 * std::exp(-q / 2) * w;
            EXPECT_NEAR(naive.alpha.at(x, y), a, 1e-14);
            EXPECT_NEAR(naive.color.at(x, y, 2), 0.9 * a, 1e-14);
        }
}

TEST(Render, AlphaEqualsWhiteColorRender) {
    std::mt19937_64 rng(5);
    const Camera cam = axis_camera(48, 40, 45.0);
    GaussianCloud c = random_cloud(rng, 150, 1.0, 3.0, 1.0, 0.02, 0.12, 0.05, 0.99);
    const RenderOutput out = render_cloud(c, cam);
    for (auto &col : c.colors) col = Vec3::Ones();
    const RenderOutput white = render_cloud(c, cam);
    for (std::size_t p = 0; p < out.alpha.data.size(); ++p)
        EXPECT_NEAR(out.alpha.data[p], white.color.data[p * 3], 1e-6);
}

TEST(Render, InvariantToSplatOrder) {
    std::mt19937_64 rng(6);
    const Camera cam = axis_camera(40, 40, 40.0);
    const GaussianCloud c = random_cloud(rng, 120, 1.0, 3.0, 1.0, 0.02, 0.12);
    auto splats = project(c, cam);
    // Force ties so the index tie-break is exercised.
    for (std::size_t i = 0; i + 1 < splats.size(); i += 2) splats[i + 1].depth = splats[i].depth;
    const RenderOutput a = render(splats, 40, 40);
    std::shuffle(splats.begin(), splats.end(), rng);
    const RenderOutput b = render(splats, 40, 40);
    EXPECT_EQ(a.color.data, b.color.data);
    EXPECT_EQ(a.alpha.data, b.alpha.data);
    EXPECT_EQ(a.label.data, b.label.data);
}

TEST(Render, AlphaMonotoneInOpacity) {
    std::mt19937_64 rng(8);
    const Camera cam = axis_camera(40, 40, 40.0);
    GaussianCloud c = random_cloud(rng, 80, 1.0, 3.0, 1.0, 0.02, 0.15, 0.05, 0.95);
    for (int trial = 0; trial < 20; ++trial) {
        const RenderOutput before = render_cloud(c, cam);
        const std::size_t i = rng() % c.size();
        c.opacity_logits[i] += 0.5 + 0.1 * trial;
        const RenderOutput after = render_cloud(c, cam);
        for (std::size_t p = 0; p < before.alpha.data.size(); ++p)
            EXPECT_GE(after.alpha.data[p], before.alpha.data[p] - 1e-12);
    }
}

TEST(RenderBackward, ColorGradientIsBlendWeight) {
    const Camera cam = axis_camera(16, 16, 20.0);
    GaussianCloud c;
    c.push_back(Vec3(0, 0, 2), Vec3::Constant(std::log(0.1)), Vec4(1, 0, 0, 0), inverse_sigmoid(0.6),
                Vec3(0.3, 0.3, 0.3));
    c.push_back(Vec3(0.02, 0, 3), Vec3::Constant(std::log(0.15)), Vec4(1, 0, 0, 0), inverse_sigmoid(0.5),
                Vec3(0.8, 0.1, 0.1));
    const RenderOutput out = render_cloud(c, cam);
    // dL/dC = 1 at a single pixel, red channel only.
    RenderGrads g;
    g.color = Image(16, 16, 3);
    const int px = 8, py = 7;
    g.color.at(px, py, 0) = 1.0;
    const CloudGradients grad = render_backward(c, cam, out, g);
    const auto splats = project(c, cam);
    auto alpha_of = [&](int i) {
        const ScreenSplat &s = splats[i];
        const double dx = px - s.mean2d.x(), dy = py - s.mean2d.y();
        const double q = s.conic(0, 0) * dx * dx + 2 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy;
        return std::min(0.99, s.opacity * splat_kernel(q));
    };
    const double a0 = alpha_of(0), a1 = alpha_of(1);
    EXPECT_NEAR(grad.colors[0][0], a0, 1e-12);
    EXPECT_NEAR(grad.colors[1][0], a1 * (1 - a0), 1e-12);
    EXPECT_EQ(grad.colors[0][1], 0.0);
}

TEST(RenderBackward, InvisibleGaussianGetsZeroGradient) {
    const Camera cam = axis_camera(16, 16, 20.0);
    GaussianCloud c;
    // Wall of opaque Gaussians drives transmittance below the cutoff before the hidden one.
    for (int k = 0; k < 4; ++k)
        c.push_back(Vec3(0, 0, 1.0 + 0.01 * k), Vec3(std::log(2.0), std::log(2.0), std::log(0.01)),
                    Vec4(1, 0, 0, 0), 30.0, Vec3(0.5, 0.5, 0.5));
    c.push_back(Vec3(0.1, 0.1, 3.0), Vec3::Constant(std::log(0.1)), Vec4(1, 0, 0, 0), 0.0, Vec3(1, 0, 0), 0.5);
    // And one far off-screen.
    c.push_back(Vec3(40, 0, 3.0), Vec3::Constant(std::log(0.1)), Vec4(1, 0, 0, 0), 0.0, Vec3(1, 0, 0), 0.5);
    std::mt19937_64 rng(2);
    const testing::LinearLoss loss(16, 16, rng);
    const RenderOutput out = render_cloud(c, cam);
    const CloudGradients g = render_backward(c, cam, out, loss.weights);
    for (std::size_t i : {std::size_t{4}, std::size_t{5}}) {
        EXPECT_EQ(g.positions[i], Vec3::Zero());
        EXPECT_EQ(g.log_scales[i], Vec3::Zero());
        EXPECT_EQ(g.rotations[i], Vec4::Zero());
        EXPECT_EQ(g.opacity_logits[i], 0.0);
        EXPECT_EQ(g.colors[i], Vec3::Zero());
        EXPECT_EQ(g.labels[i], 0.0);
    }
}

TEST(RenderBackward, MismatchedInputsAreContractViolations) {
    std::mt19937_64 rng(3);
    const Camera cam = axis_camera(16, 16, 20.0);
    GaussianCloud c = random_cloud(rng, 5, 1.5, 3.0, 0.8, 0.05, 0.2);
    const RenderOutput out = render_cloud(c, cam);
    const testing::LinearLoss loss(16, 16, rng);
    GaussianCloud moved = c;
    moved.positions[0].x() += 0.01;
    try {
        render_backward(moved, cam, out, loss.weights);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ContractViolation);
    }
    Camera other = cam;
    other.translation.x() = 0.2;
    EXPECT_THROW(render_backward(c, other, out, loss.weights), Error);
    const testing::LinearLoss wrong(8, 8, rng);
    EXPECT_THROW(render_backward(c, cam, out, wrong.weights), Error);
}

TEST(RenderBackward, FiniteDifferenceCheckAllFields) {
    std::mt19937_64 rng(1234);
    for (int scene = 0; scene < 5; ++scene) {
        Camera cam = axis_camera(16, 16, 18.0);
        const GaussianCloud c = random_cloud(rng, 8, 1.5, 3.0, 0.8, 0.05, 0.25, 0.1, 0.6);
        const testing::LinearLoss loss(16, 16, rng);
        const auto rep = testing::check_cloud_gradients(c, cam, loss);
        EXPECT_GT(rep.checked, 50);
        for (const auto &f : rep.failures)
            ADD_FAILURE() << "scene " << scene << " " << f.name << " analytic=" << f.analytic << " fd=" << f.numeric;
    }
}

TEST(RenderBackward, FiniteDifferenceCheckSharedPose) {
    std::mt19937_64 rng(77);
    for (int scene = 0; scene < 5; ++scene) {
        const Camera cam = axis_camera(16, 16, 18.0);
        const GaussianCloud c = random_cloud(rng, 8, 1.5, 3.0, 0.8, 0.05, 0.25, 0.1, 0.6);
        const testing::LinearLoss loss(16, 16, rng);
        Vec6 r6;
        r6 << 1.0, 0.05, -0.03, -0.04, 0.9, 0.1;
        const auto rep = testing::check_pose_gradients(c, cam, loss, r6, Vec3(0.02, -0.01, 0.03), centroid(c));
        EXPECT_GE(rep.checked, 6);
        for (const auto &f : rep.failures)
            ADD_FAILURE() << "scene " << scene << " " << f.name << " analytic=" << f.analytic << " fd=" << f.numeric;
    }
}

} // namespace
} // namespace egogs
