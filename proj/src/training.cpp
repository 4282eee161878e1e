// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/training.hpp"

#include "egogs/density.hpp"
#include "egogs/error.hpp"
#include "egogs/losses.hpp"
#include "egogs/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace egogs {

Mask body_keep(const CameraFrame &frame, int dilation) {
    if (dilation <= 0) return frame.body_mask;
    return mask_not(dilate_mask(mask_not(frame.body_mask), dilation));
}

double camera_extent(std::span<const TrainView> views) {
    if (views.empty()) return 1.0;
    Vec3 mean = Vec3::Zero();
    for (const auto &v : views) mean += v.frame->camera.center();
    mean /= static_cast<double>(views.size());
    double r = 0.0;
    for (const auto &v : views) r = std::max(r, (v.frame->camera.center() - mean).norm());
    return 1.1 * std::max(r, 1e-6);
}

std::size_t FrameSampler::next() {
    if (count_ == 0) throw Error(ErrorKind::InvalidInput, "no frames to sample");
    if (pos_ >= order_.size()) {
        order_.resize(count_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }
    return order_[pos_++];
}

void train_photometric(GaussianCloud &cloud, OptimizerState &state, std::span<const TrainView> views,
                       const PhotometricPhase &phase, std::mt19937_64 &rng, const ProgressFn &progress) {
    if (phase.iters <= 0) return;
    if (views.empty()) throw Error(ErrorKind::InvalidInput, "train_photometric: no training views");
    if (state.size() != cloud.size())
        throw Error(ErrorKind::ContractViolation, "train_photometric: optimizer and cloud sizes differ");
    FrameSampler sampler(views.size(), rng);
    const DensifyThresholds thresholds = phase.densify.thresholds(phase.extent);
    double running = 0.0;

    for (int it = 0; it < phase.iters; ++it) {
        const std::int64_t step = phase.step_offset + it;
        state.rates = phase.rates;
        if (phase.position_lr_steps > 0)
            state.rates.position =
                exponential_lr(phase.rates.position, phase.position_lr_final, step, phase.position_lr_steps);

        const TrainView &view = views[sampler.next()];
        if (cloud.empty()) break;
        const RenderOutput out = render_cloud(cloud, view.frame->camera, RenderMode::Color);
        const ImageLoss loss = masked_photometric(out.color, view.frame->image, view.keep, phase.lambda_dssim);
        RenderGrads rg;
        rg.color = loss.grad;
        CloudGradients grads = render_backward(cloud, view.frame->camera, out, rg);
        double total = loss.value;
        if (phase.entropy_weight > 0.0) {
            const EntropyLoss ent = entropy_loss_from_logits(cloud.opacity_logits);
            total += phase.entropy_weight * ent.value;
            for (std::size_t i = 0; i < cloud.size(); ++i)
                grads.opacity_logits[i] += phase.entropy_weight * ent.grad[i];
        }
        if (!std::isfinite(total))
            throw DivergenceError("loss is not finite at step " + std::to_string(step), cloud);
        running = it == 0 ? total : 0.98 * running + 0.02 * total;

        // adam_step validates every gradient before it writes, so `cloud` is still the last finite state.
        try {
            adam_step(cloud, grads, state);
        } catch (const Error &e) {
            if (e.kind() == ErrorKind::Divergence) throw DivergenceError(e.what(), cloud);
            throw;
        }
        state.accumulate(grads);

        const auto &d = phase.densify;
        if (d.enabled && step > 0 && step >= d.start && step < d.stop && d.interval > 0 && step % d.interval == 0) {
            const DensifyStats s = densify_and_prune(cloud, state, thresholds, rng);
            if (progress)
                progress("densify step=" + std::to_string(step) + " cloned=" + std::to_string(s.cloned) +
                         " split=" + std::to_string(s.split) + " pruned=" + std::to_string(s.pruned) +
                         " n=" + std::to_string(cloud.size()));
        }
        if (progress && (it + 1) % 500 == 0)
            progress("step=" + std::to_string(step + 1) + " loss=" + std::to_string(running) +
                     " n=" + std::to_string(cloud.size()));
    }
}

} // namespace egogs
