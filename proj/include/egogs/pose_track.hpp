// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/pose.hpp"
#include "egogs/types.hpp"

#include <vector>

namespace egogs {

/// Object pose at one frame: maps the canonical object cloud into that frame.
struct TrackKnot {
    int frame_index = 0;
    RigidPose pose;
    bool operator==(const TrackKnot &) const = default;
};

/// Per-frame object poses sampled every `step` frames. Knot frame indices are
/// strictly increasing. `pivot` is the canonical object centroid; between
/// knots the pivot moves linearly while the rotation is slerped.
struct PoseTrack {
    std::vector<TrackKnot> knots;
    Vec3 pivot = Vec3::Zero();
    int step = 1;

    bool empty() const { return knots.empty(); }
    int first_frame() const { return knots.front().frame_index; }
    int last_frame() const { return knots.back().frame_index; }
    /// Index of the knot at `frame`, or -1.
    int find(int frame) const;
    bool operator==(const PoseTrack &) const = default;
};

/// Pose at fractional frame `t` inside [first_frame, last_frame]: exact at
/// knots; between knots the relative rotation of the bracketing pair is
/// slerped and the pivot translated linearly. Throws Error(OutOfRange).
RigidPose interpolate_pose(const PoseTrack &track, double t);

/// Identity before the first knot, the last pose after the last one, and
/// interpolate_pose in between.
RigidPose pose_at_frame(const PoseTrack &track, int frame);

} // namespace egogs
