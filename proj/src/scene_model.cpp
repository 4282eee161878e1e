// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/scene_model.hpp"

#include "egogs/geometry.hpp"

namespace egogs {

GaussianCloud scene_at_frame(const SceneModel &model, int frame) {
    GaussianCloud c = model.background;
    if (!model.object.empty()) c.append(apply_rigid(model.object, pose_at_frame(model.track, frame)));
    return c;
}

RenderOutput render_scene(const SceneModel &model, const Camera &camera, int frame, RenderMode mode) {
    return render_cloud(scene_at_frame(model, frame), camera, mode);
}

} // namespace egogs
