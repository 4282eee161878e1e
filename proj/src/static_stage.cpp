// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/static_stage.hpp"

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"
#include "egogs/losses.hpp"
#include "egogs/rasterizer.hpp"
#include "spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace egogs {

namespace {

constexpr int kLabelCandidates = 32;

// Pixel color under the projection of `p` in the first view that sees it.
Vec3 sample_color(const Vec3 &p, std::span<const TrainView> views) {
    for (const auto &v : views) {
        const Camera &cam = v.frame->camera;
        const Vec3 c = cam.to_camera(p);
        if (c.z() <= raster::kNearPlane) continue;
        const double u = cam.intrinsics.fx * c.x() / c.z() + cam.intrinsics.cx;
        const double w = cam.intrinsics.fy * c.y() / c.z() + cam.intrinsics.cy;
        const int x = static_cast<int>(std::floor(u)), y = static_cast<int>(std::floor(w));
        if (x < 0 || y < 0 || x >= cam.width || y >= cam.height || !v.keep.at(x, y)) continue;
        const Image &img = v.frame->image;
        return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
    }
    return Vec3::Constant(0.5);
}

} // namespace

GaussianCloud initialize_from_points(const PointSet &points, std::span<const TrainView> views,
                                     const StaticTrainConfig &cfg) {
    const std::size_t n = points.positions.size();
    if (n == 0) throw Error(ErrorKind::InvalidInput, "initialize_from_points: empty point set");
    const bool has_colors = points.colors.size() == n;
    detail::PointGrid grid(points.positions);
    const double logit = inverse_sigmoid(cfg.init_opacity);
    GaussianCloud cloud;
    cloud.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 &p = points.positions[i];
        const auto nn = grid.nearest(p, 3, static_cast<int>(i));
        double d2 = 0.0;
        for (int j : nn) d2 += (points.positions[j] - p).squaredNorm();
        const double scale = nn.empty() ? 0.01 : std::sqrt(std::max(d2 / nn.size(), 1e-14));
        const Vec3 color = has_colors ? points.colors[i] : sample_color(p, views);
        cloud.push_back(p, Vec3::Constant(std::log(scale)), Vec4(1, 0, 0, 0), logit,
                        color.cwiseMax(0.0).cwiseMin(1.0), cfg.label_init);
    }
    return cloud;
}

GaussianCloud train_static(std::span<const TrainView> views, const PointSet &points, const StaticTrainConfig &cfg,
                           std::mt19937_64 &rng, const ProgressFn &progress, StaticTrainReport *report) {
    if (views.empty()) throw Error(ErrorKind::InvalidInput, "train_static: no training views");
    GaussianCloud cloud = initialize_from_points(points, views, cfg);
    FieldRates rates = cfg.rates;
    rates.label = 0.0;
    OptimizerState state(cloud.size(), rates);

    PhotometricPhase main;
    main.iters = cfg.main_iters;
    main.lambda_dssim = cfg.lambda_dssim;
    main.rates = rates;
    main.position_lr_final = cfg.position_lr_final;
    main.position_lr_steps = cfg.main_iters + cfg.entropy_iters;
    main.densify = cfg.densify;
    main.extent = camera_extent(views);
    train_photometric(cloud, state, views, main, rng, progress);

    PhotometricPhase entropy = main;
    entropy.iters = cfg.entropy_iters;
    entropy.entropy_weight = cfg.entropy_weight;
    entropy.step_offset = cfg.main_iters;
    entropy.densify.enabled = false;
    train_photometric(cloud, state, views, entropy, rng, progress);

    if (report) {
        report->opacities_before_prune.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) report->opacities_before_prune[i] = cloud.opacity(i);
    }
    const std::size_t removed = prune_transparent(cloud, cfg.transparent_threshold, &state);
    if (report) report->pruned = removed;
    if (progress)
        progress("pruned " + std::to_string(removed) + " transparent, kept " + std::to_string(cloud.size()));
    return cloud;
}

// The label gradient of a render whose upstream label gradient is the keep mask.
std::vector<double> blend_weights(const GaussianCloud &cloud, std::span<const TrainView> views) {
    std::vector<double> weight(cloud.size(), 0.0);
    for (const auto &v : views) {
        const RenderOutput out = render_cloud(cloud, v.frame->camera, RenderMode::Label);
        RenderGrads rg;
        rg.label = Image(out.width, out.height, 1);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) rg.label.at(x, y) = v.keep.at(x, y) ? 1.0 : 0.0;
        const CloudGradients g = render_backward(cloud, v.frame->camera, out, rg);
        for (std::size_t i = 0; i < cloud.size(); ++i) weight[i] += g.labels[i];
    }
    return weight;
}

std::vector<double> visibility_fractions(const GaussianCloud &cloud, std::span<const TrainView> views) {
    // Integral of the footprint kernel over the plane for unit covariance.
    static const double kernel_area = [] {
        const int steps = 9000;
        double acc = 0.0;
        for (int k = 0; k < steps; ++k) acc += splat_kernel((k + 0.5) * raster::kCutoffPower / steps);
        return acc * std::numbers::pi * raster::kCutoffPower / steps;
    }();
    const std::vector<double> weight = blend_weights(cloud, views);
    std::vector<double> footprint(cloud.size(), 0.0);
    for (const auto &v : views)
        for (const ScreenSplat &s : project(cloud, v.frame->camera))
            footprint[s.source] += s.opacity * kernel_area * std::sqrt(std::max(s.cov2d.determinant(), 0.0));
    std::vector<double> out(cloud.size(), 0.0);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (footprint[i] > 0.0) out[i] = weight[i] / footprint[i];
    return out;
}

std::vector<double> train_labels(GaussianCloud &cloud, std::span<const TrainView> mask_views,
                                 const StaticTrainConfig &cfg, std::mt19937_64 &rng) {
    if (mask_views.empty()) throw Error(ErrorKind::InvalidInput, "train_labels: no mask views");
    for (const auto &v : mask_views)
        if (!v.frame->object_mask)
            throw Error(ErrorKind::ContractViolation,
                        "train_labels: frame " + std::to_string(v.frame->frame_index) + " has no object mask");

    const std::vector<double> weight = visibility_fractions(cloud, mask_views);

    OptimizerState state(cloud.size(), FieldRates::labels_only(cfg.label_lr));
    FrameSampler sampler(mask_views.size(), rng);
    for (int it = 0; it < cfg.label_iters; ++it) {
        const TrainView &v = mask_views[sampler.next()];
        const RenderOutput out = render_cloud(cloud, v.frame->camera, RenderMode::Label);
        const ImageLoss loss = bce_label_loss(out.label, *v.frame->object_mask, &v.keep);
        RenderGrads rg;
        rg.label = loss.grad;
        const CloudGradients g = render_backward(cloud, v.frame->camera, out, rg);
        adam_step(cloud, g, state);
    }

    std::vector<Vec3> observed_pos;
    std::vector<int> observed_idx;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (weight[i] >= cfg.label_min_visibility) {
            observed_pos.push_back(cloud.positions[i]);
            observed_idx.push_back(static_cast<int>(i));
        }
    if (observed_idx.size() < cloud.size()) {
        std::vector<double> filled = cloud.labels;
        if (cfg.label_propagate && !observed_idx.empty()) {
            detail::PointGrid grid(observed_pos);
            for (std::size_t i = 0; i < cloud.size(); ++i)
                if (weight[i] < cfg.label_min_visibility) {
                    // Among nearby observed Gaussians take the one closest in this
                    // Gaussian's own metric, so labels spread along its surface.
                    const auto nn = grid.nearest(cloud.positions[i], kLabelCandidates);
                    const Mat3 inv = (build_covariance(cloud.log_scales[i], cloud.rotations[i]) +
                                      1e-12 * Mat3::Identity())
                                         .inverse();
                    int best = nn.front();
                    double best_d = 1e300;
                    for (int j : nn) {
                        const Vec3 d = observed_pos[j] - cloud.positions[i];
                        const double m = d.dot(inv * d);
                        if (m < best_d) {
                            best_d = m;
                            best = j;
                        }
                    }
                    filled[i] = cloud.labels[observed_idx[best]];
                }
        } else {
            for (std::size_t i = 0; i < cloud.size(); ++i)
                if (weight[i] < cfg.label_min_visibility) filled[i] = cfg.label_init;
        }
        cloud.labels = std::move(filled);
    }
    return weight;
}

ObjectSplit split_by_label(const GaussianCloud &cloud, double threshold) {
    ObjectSplit out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (sigmoid(cloud.labels[i]) > threshold)
            out.object.append_from(cloud, i);
        else
            out.background.append_from(cloud, i);
    }
    return out;
}

ObjectSplit identify_object(GaussianCloud cloud, std::span<const TrainView> mask_views,
                            const StaticTrainConfig &cfg, std::mt19937_64 &rng) {
    train_labels(cloud, mask_views, cfg, rng);
    ObjectSplit split = split_by_label(cloud, cfg.label_threshold);
    if (split.object.empty())
        throw Error(ErrorKind::EmptyObject, "identify_object: no Gaussian is labeled as object");
    return split;
}

Mask background_keep(const CameraFrame &frame, const Mask &object_mask, int body_dilation, int object_dilation) {
    const Mask grown = object_dilation > 0 ? dilate_mask(object_mask, object_dilation) : object_mask;
    return mask_and(body_keep(frame, body_dilation), mask_not(grown));
}

void update_background(GaussianCloud &background, std::span<const TrainView> views, const PipelineConfig &cfg,
                       std::mt19937_64 &rng, const ProgressFn &progress) {
    if (cfg.background_iters <= 0 || background.empty()) return;
    FieldRates rates = cfg.finetune_rates;
    rates.label = 0.0;
    OptimizerState state(background.size(), rates);
    PhotometricPhase phase;
    phase.iters = cfg.background_iters;
    phase.lambda_dssim = cfg.static_stage.lambda_dssim;
    phase.rates = rates;
    phase.densify = cfg.background_densify;
    phase.extent = camera_extent(views);
    train_photometric(background, state, views, phase, rng, progress);
    prune_transparent(background, cfg.background_densify.min_opacity, &state);
}

} // namespace egogs
