// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/pose_track.hpp"

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>

namespace egogs {

int PoseTrack::find(int frame) const {
    auto it = std::lower_bound(knots.begin(), knots.end(), frame,
                               [](const TrackKnot &k, int f) { return k.frame_index < f; });
    if (it == knots.end() || it->frame_index != frame) return -1;
    return static_cast<int>(it - knots.begin());
}

RigidPose interpolate_pose(const PoseTrack &track, double t) {
    if (track.empty() || !(t >= track.first_frame() && t <= track.last_frame()))
        throw Error(ErrorKind::OutOfRange,
                    "pose requested at frame " + std::to_string(t) +
                        (track.empty() ? std::string(" of an empty track")
                                       : " outside track range [" + std::to_string(track.first_frame()) + ", " +
                                             std::to_string(track.last_frame()) + "]"));
    auto hi = std::lower_bound(track.knots.begin(), track.knots.end(), t,
                               [](const TrackKnot &k, double f) { return k.frame_index < f; });
    if (hi->frame_index == t) return hi->pose;
    const TrackKnot &b = *hi;
    const TrackKnot &a = *(hi - 1);
    const double s = (t - a.frame_index) / static_cast<double>(b.frame_index - a.frame_index);

    const Mat3 ra = pose_rotation(a.pose), rb = pose_rotation(b.pose);
    const Eigen::Quaterniond delta(Mat3(rb * ra.transpose()));
    const Mat3 rs = Eigen::Quaterniond::Identity().slerp(s, delta).toRotationMatrix() * ra;
    const Vec3 ca = ra * track.pivot + a.pose.translation;
    const Vec3 cb = rb * track.pivot + b.pose.translation;
    const Vec3 cs = (1.0 - s) * ca + s * cb;
    return make_pose(rs, cs - rs * track.pivot, a.pose.reference_frame_index);
}

RigidPose pose_at_frame(const PoseTrack &track, int frame) {
    if (track.empty() || frame < track.first_frame()) return RigidPose::identity();
    if (frame >= track.last_frame()) return track.knots.back().pose;
    return interpolate_pose(track, frame);
}

} // namespace egogs
