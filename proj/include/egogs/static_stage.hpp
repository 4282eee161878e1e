// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/config.hpp"
#include "egogs/dataset.hpp"
#include "egogs/gaussian_cloud.hpp"
#include "egogs/training.hpp"

#include <random>
#include <span>
#include <vector>

namespace egogs {

/// Seeds one Gaussian per point: isotropic scale from the root mean squared
/// distance to the 3 nearest neighbors, opacity `init_opacity`, identity
/// rotation and labels at `label_init`. Colors come from the point set, or
/// from the first view that sees the point when the set has none.
GaussianCloud initialize_from_points(const PointSet &points, std::span<const TrainView> views,
                                     const StaticTrainConfig &cfg);

/// Optional diagnostics of train_static.
struct StaticTrainReport {
    std::vector<double> opacities_before_prune;
    std::size_t pruned = 0;
};

/// Reconstruction of a static clip: `main_iters` of masked photometric
/// training with densification, `entropy_iters` more with the opacity entropy
/// term and no densification, then removal of every Gaussian with opacity
/// below `transparent_threshold`.
GaussianCloud train_static(std::span<const TrainView> views, const PointSet &points, const StaticTrainConfig &cfg,
                           std::mt19937_64 &rng, const ProgressFn &progress = {}, StaticTrainReport *report = nullptr);

/// Blend weight of each Gaussian summed over the kept pixels of `views`.
std::vector<double> blend_weights(const GaussianCloud &cloud, std::span<const TrainView> views);

/// Blend weight over footprint: the summed blend weight of each Gaussian
/// divided by the summed integral of its alpha footprint over the same views,
/// roughly the mean transmittance in front of it. 0 when never projected.
std::vector<double> visibility_fractions(const GaussianCloud &cloud, std::span<const TrainView> views);

/// Optimizes only the label field against the object masks of `mask_views`,
/// then resolves Gaussians whose visibility fraction over those views stays
/// below `label_min_visibility` (see StaticTrainConfig). Returns the
/// visibility fractions.
std::vector<double> train_labels(GaussianCloud &cloud, std::span<const TrainView> mask_views,
                                 const StaticTrainConfig &cfg, std::mt19937_64 &rng);

struct ObjectSplit {
    GaussianCloud background;
    GaussianCloud object;
};

/// Object = sigmoid(label) > threshold, background = the rest. Order is kept.
ObjectSplit split_by_label(const GaussianCloud &cloud, double threshold);

/// train_labels followed by split_by_label. Throws Error(EmptyObject) when no
/// Gaussian crosses the threshold.
ObjectSplit identify_object(GaussianCloud cloud, std::span<const TrainView> mask_views,
                            const StaticTrainConfig &cfg, std::mt19937_64 &rng);

/// Pixels that may supervise the background: outside the dilated body mask
/// and outside `object_mask` grown by `object_dilation`.
Mask background_keep(const CameraFrame &frame, const Mask &object_mask, int body_dilation, int object_dilation);

/// Continues training the background over frames whose keep masks already
/// exclude the object.
void update_background(GaussianCloud &background, std::span<const TrainView> views, const PipelineConfig &cfg,
                       std::mt19937_64 &rng, const ProgressFn &progress = {});

} // namespace egogs
