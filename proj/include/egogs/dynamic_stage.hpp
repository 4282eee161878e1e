// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/clips.hpp"
#include "egogs/config.hpp"
#include "egogs/dataset.hpp"
#include "egogs/optimizer.hpp"
#include "egogs/pose_track.hpp"
#include "egogs/training.hpp"

#include <random>
#include <span>
#include <vector>

namespace egogs {

/// A supervised object view and the canonical-to-frame pose it was fitted with.
struct TrackedView {
    TrainView view;
    RigidPose pose;
};

/// Mutable state of the object while a clip is tracked.
struct ObjectState {
    GaussianCloud cloud; // canonical frame
    OptimizerState optimizer;
    Vec3 pivot = Vec3::Zero(); // canonical centroid
    double extent = 1.0;       // scene extent for the density thresholds
    std::size_t max_gaussians = 0;
};

ObjectState make_object_state(GaussianCloud canonical, const DynamicTrainConfig &cfg, double extent);

/// Motion between consecutive knots expressed about the object centroid:
/// x' = R (x - c) + c + offset, with c the centroid before the motion.
struct RelativeMotion {
    Vec3 offset = Vec3::Zero();
    Vec6 rot6d = RigidPose{}.rot6d;
};

struct FramePoseResult {
    RigidPose pose; // canonical to frame
    RelativeMotion motion;
    double final_loss = 0.0;
};

/// Fits the object to one frame in three phases: pose with the Gaussians at a
/// reduced rate, Gaussians alone with densification, pose again. With
/// probability `replay_probability` an iteration supervises a random earlier
/// view at its stored pose instead. `previous` is the pose of the last knot.
/// Throws Error(ObjectLost) when the frame's object mask is empty.
FramePoseResult estimate_frame_pose(ObjectState &object, const RigidPose &previous, const RelativeMotion &init,
                                    const TrainView &view, std::span<const TrackedView> history,
                                    const DynamicTrainConfig &cfg, std::mt19937_64 &rng);

/// Knot frames of `clip` when stepping `k` video frames from `anchor`. A last
/// knot at or after the clip end is added when the stride stops short of it.
/// Every knot must be a training frame with an object mask.
std::vector<int> select_knot_frames(const Dataset &dataset, const Clip &clip, int anchor, int k);

/// Tracks the object through `knot_views` sequentially, then re-optimizes all
/// knot poses and the cloud jointly. `anchor` is the last view before the clip
/// with its known pose. Appends the anchor (if new) and one knot per view to
/// `track`.
void track_clip(ObjectState &object, PoseTrack &track, const TrackedView &anchor,
                std::span<const TrainView> knot_views, const DynamicTrainConfig &cfg, std::mt19937_64 &rng,
                const ProgressFn &progress = {});

} // namespace egogs
