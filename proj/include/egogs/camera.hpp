// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/image.hpp"
#include "egogs/types.hpp"

#include <optional>

namespace egogs {

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    bool operator==(const Intrinsics &) const = default;
};

/// Pinhole camera. Extrinsics map world to camera: x_cam = rotation * x_world + translation.
/// Camera axes follow the x-right, y-down, z-forward convention; pixel (i, j)
/// has its center at image coordinate (i, j).
struct Camera {
    int width = 0;
    int height = 0;
    Intrinsics intrinsics;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }
    Vec3 center() const { return -rotation.transpose() * translation; }
    bool operator==(const Camera &) const = default;
};

/// World-to-camera pose looking from `eye` toward `target`; `up` is the world
/// direction that should appear upward in the image.
Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, const Intrinsics &intrinsics, int width,
               int height);

/// One observation of the scene.
struct CameraFrame {
    Image image;     // H x W x 3
    Mask body_mask;  // 1 = keep, 0 = body/hand pixel
    std::optional<Mask> object_mask; // 1 = object
    Camera camera;
    int frame_index = 0;
    int clip_id = 0;
    bool train = true;
};

/// Throws Error(InvalidInput) unless `r` is a proper rotation within `tol`.
void check_rotation(const Mat3 &r, double tol, const char *what);

} // namespace egogs
