// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/gaussian_cloud.hpp"
#include "egogs/pose_track.hpp"
#include "egogs/rasterizer.hpp"

#include <map>
#include <string>

namespace egogs {

/// Background cloud, canonical object cloud and the object's pose track.
/// The scene at frame f is background plus apply_rigid(object, pose_at_frame(track, f)).
struct SceneModel {
    GaussianCloud background;
    GaussianCloud object;
    PoseTrack track;
    std::map<std::string, std::string> metadata;
    bool operator==(const SceneModel &) const = default;
};

/// Composite cloud of the scene at `frame`.
GaussianCloud scene_at_frame(const SceneModel &model, int frame);

/// Tile-based render of the composite scene at `frame` from `camera`.
RenderOutput render_scene(const SceneModel &model, const Camera &camera, int frame,
                          RenderMode mode = RenderMode::All);

} // namespace egogs
