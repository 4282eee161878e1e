// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

// Finite-difference oracle for renderer gradients. The loss is a fixed random
// linear functional of all three output channels, so its gradient w.r.t. the
// outputs is exactly the weight images.

#pragma once

#include "egogs/geometry.hpp"
#include "egogs/rasterizer.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace egogs::testing {

struct LinearLoss {
    RenderGrads weights;

    LinearLoss(int width, int height, std::mt19937_64 &rng) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        weights.color = Image(width, height, 3);
        weights.alpha = Image(width, height, 1);
        weights.label = Image(width, height, 1);
        for (auto &v : weights.color.data) v = u(rng);
        for (auto &v : weights.alpha.data) v = u(rng);
        for (auto &v : weights.label.data) v = u(rng);
    }

    double operator()(const RenderOutput &out) const {
        double s = 0.0;
        for (std::size_t i = 0; i < out.color.data.size(); ++i) s += out.color.data[i] * weights.color.data[i];
        for (std::size_t i = 0; i < out.alpha.data.size(); ++i) s += out.alpha.data[i] * weights.alpha.data[i];
        for (std::size_t i = 0; i < out.label.data.size(); ++i) s += out.label.data[i] * weights.label.data[i];
        return s;
    }
};

struct GradMismatch {
    std::string name;
    double analytic;
    double numeric;
};

struct GradCheckReport {
    int checked = 0;
    double worst_relative = 0.0;
    std::vector<GradMismatch> failures;
};

inline void compare_grad(GradCheckReport &rep, const std::string &name, double analytic, double numeric,
                         double rel_tol, double floor) {
    if (std::abs(analytic) <= floor && std::abs(numeric) <= floor) return;
    ++rep.checked;
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
    rep.worst_relative = std::max(rep.worst_relative, rel);
    if (rel > rel_tol) rep.failures.push_back({name, analytic, numeric});
}

/// Central differences over every scalar of every Gaussian field.
inline GradCheckReport check_cloud_gradients(const GaussianCloud &cloud, const Camera &cam, const LinearLoss &loss,
                                             double h = 1e-4, double rel_tol = 1e-3, double floor = 1e-6) {
    const RenderOutput out = render_cloud(cloud, cam);
    const CloudGradients g = render_backward(cloud, cam, out, loss.weights);
    auto eval = [&](const GaussianCloud &c) { return loss(render_cloud(c, cam)); };
    GradCheckReport rep;
    auto fd = [&](auto &&mutate) {
        GaussianCloud p = cloud, m = cloud;
        mutate(p, +h);
        mutate(m, -h);
        return (eval(p) - eval(m)) / (2.0 * h);
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const std::string tag = "#" + std::to_string(i);
        for (int k = 0; k < 3; ++k) {
            compare_grad(rep, "position" + tag, g.positions[i][k],
                         fd([&](GaussianCloud &c, double d) { c.positions[i][k] += d; }), rel_tol, floor);
            compare_grad(rep, "log_scale" + tag, g.log_scales[i][k],
                         fd([&](GaussianCloud &c, double d) { c.log_scales[i][k] += d; }), rel_tol, floor);
            compare_grad(rep, "color" + tag, g.colors[i][k],
                         fd([&](GaussianCloud &c, double d) { c.colors[i][k] += d; }), rel_tol, floor);
        }
        for (int k = 0; k < 4; ++k)
            compare_grad(rep, "rotation" + tag, g.rotations[i][k],
                         fd([&](GaussianCloud &c, double d) { c.rotations[i][k] += d; }), rel_tol, floor);
        compare_grad(rep, "opacity" + tag, g.opacity_logits[i],
                     fd([&](GaussianCloud &c, double d) { c.opacity_logits[i] += d; }), rel_tol, floor);
        compare_grad(rep, "label" + tag, g.labels[i], fd([&](GaussianCloud &c, double d) { c.labels[i] += d; }),
                     rel_tol, floor);
    }
    return rep;
}

/// Gradient of the loss w.r.t. a shared rigid transform x' = R(r6)(x - pivot) + pivot + offset.
inline GradCheckReport check_pose_gradients(const GaussianCloud &canonical, const Camera &cam, const LinearLoss &loss,
                                            const Vec6 &r6, const Vec3 &offset, const Vec3 &pivot,
                                            double h = 1e-4, double rel_tol = 1e-3, double floor = 1e-6) {
    auto posed_cloud = [&](const Vec6 &rr, const Vec3 &off) {
        const Mat3 r = sixd_to_rotmat(rr);
        return apply_rigid(canonical, make_pose(r, pivot + off - r * pivot));
    };
    const GaussianCloud posed = posed_cloud(r6, offset);
    const RenderOutput out = render_cloud(posed, cam);
    const CloudGradients g = render_backward(posed, cam, out, loss.weights);
    PoseGradient pg;
    rigid_backward(canonical, sixd_to_rotmat(r6), pivot, g, pg, &r6);
    GradCheckReport rep;
    for (int k = 0; k < 3; ++k) {
        Vec3 p = offset, m = offset;
        p[k] += h;
        m[k] -= h;
        const double fd = (loss(render_cloud(posed_cloud(r6, p), cam)) - loss(render_cloud(posed_cloud(r6, m), cam))) /
                          (2.0 * h);
        compare_grad(rep, "pose.offset", pg.offset[k], fd, rel_tol, floor);
    }
    for (int k = 0; k < 6; ++k) {
        Vec6 p = r6, m = r6;
        p[k] += h;
        m[k] -= h;
        const double fd =
            (loss(render_cloud(posed_cloud(p, offset), cam)) - loss(render_cloud(posed_cloud(m, offset), cam))) /
            (2.0 * h);
        compare_grad(rep, "pose.rot6d", pg.rot6d[k], fd, rel_tol, floor);
    }
    return rep;
}

} // namespace egogs::testing
