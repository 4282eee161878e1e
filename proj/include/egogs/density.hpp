// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/gaussian_cloud.hpp"
#include "egogs/optimizer.hpp"

#include <cstdint>
#include <random>

namespace egogs {

struct DensifyThresholds {
    double grad = 2e-4;          // mean screen-space gradient norm that triggers densification
    double min_opacity = 5e-3;   // prune below this opacity
    double max_world_size = 0.0; // prune when the largest axis exceeds this; 0 disables
    double dense_size = 0.01;    // clone at or below this largest axis, split above
    std::size_t max_gaussians = 0; // no growth beyond this count; 0 means unbounded
};

struct DensifyStats {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Clone small and split large Gaussians whose mean positional gradient
/// exceeds the threshold, then prune transparent or oversized ones. Split
/// children are placed inside the parent's 1-sigma ellipsoid with scales
/// divided by 1.6. Optimizer rows follow the cloud; statistics are reset.
DensifyStats densify_and_prune(GaussianCloud &cloud, OptimizerState &state, const DensifyThresholds &thresholds,
                               std::mt19937_64 &rng);

/// Remove every Gaussian with opacity < tau, keeping `state` (if given) in step.
std::size_t prune_transparent(GaussianCloud &cloud, double tau, OptimizerState *state = nullptr);

inline constexpr double kSplitScaleDivisor = 1.6;

} // namespace egogs
