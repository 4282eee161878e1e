// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/density.hpp"

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"

#include <cmath>

namespace egogs {

namespace {

Vec3 sample_unit_ball(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        const Vec3 p(u(rng), u(rng), u(rng));
        if (p.squaredNorm() <= 1.0) return p;
    }
}

} // namespace

DensifyStats densify_and_prune(GaussianCloud &cloud, OptimizerState &state, const DensifyThresholds &th,
                               std::mt19937_64 &rng) {
    if (state.size() != cloud.size())
        throw Error(ErrorKind::ContractViolation, "densify_and_prune: optimizer and cloud sizes differ");
    DensifyStats stats;
    const std::size_t n = cloud.size();
    std::vector<bool> remove(n, false);
    std::size_t budget = th.max_gaussians == 0 ? SIZE_MAX : (th.max_gaussians > n ? th.max_gaussians - n : 0);

    for (std::size_t i = 0; i < n && budget > 0; ++i) {
        if (state.grad_count[i] == 0) continue;
        const double mean = state.grad_accum[i] / state.grad_count[i];
        if (mean < th.grad) continue;
        const Vec3 s = cloud.scale(i);
        if (s.maxCoeff() <= th.dense_size) {
            cloud.append_from(cloud, i);
            ++stats.cloned;
            --budget;
        } else {
            const Mat3 r = quat_to_rotmat(cloud.rotations[i]);
            const Vec3 child_log = (s / kSplitScaleDivisor).array().log();
            for (int c = 0; c < 2; ++c) {
                const Vec3 pos = cloud.positions[i] + r * s.cwiseProduct(sample_unit_ball(rng));
                cloud.push_back(pos, child_log, cloud.rotations[i], cloud.opacity_logits[i], cloud.colors[i],
                                cloud.labels[i]);
            }
            remove[i] = true;
            ++stats.split;
            budget = budget > 1 ? budget - 1 : 0;
        }
    }
    state.append_zero(cloud.size() - n);
    remove.resize(cloud.size(), false);

    std::vector<bool> keep(cloud.size(), true);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const bool transparent = cloud.opacity(i) < th.min_opacity;
        const bool oversized = th.max_world_size > 0.0 && cloud.scale(i).maxCoeff() > th.max_world_size;
        if (remove[i] || transparent || oversized) {
            keep[i] = false;
            if (!remove[i]) ++stats.pruned;
        }
    }
    cloud.retain(keep);
    state.retain(keep);
    state.reset_stats();
    return stats;
}

std::size_t prune_transparent(GaussianCloud &cloud, double tau, OptimizerState *state) {
    if (state && state->size() != cloud.size())
        throw Error(ErrorKind::ContractViolation, "prune_transparent: optimizer and cloud sizes differ");
    std::vector<bool> keep(cloud.size(), true);
    std::size_t removed = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.opacity(i) < tau) {
            keep[i] = false;
            ++removed;
        }
    if (removed == 0) return 0;
    cloud.retain(keep);
    if (state) state->retain(keep);
    return removed;
}

} // namespace egogs
