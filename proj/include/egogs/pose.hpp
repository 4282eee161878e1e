// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/types.hpp"

namespace egogs {

/// Rigid transform x' = R x + t with R stored in the continuous 6D form (the
/// first two columns before orthonormalization). The pose is relative to the
/// object state at `reference_frame_index`.
struct RigidPose {
    Vec3 translation = Vec3::Zero();
    Vec6 rot6d = (Vec6() << 1, 0, 0, 0, 1, 0).finished();
    int reference_frame_index = 0;

    static RigidPose identity(int reference = 0) {
        RigidPose p;
        p.reference_frame_index = reference;
        return p;
    }
    bool operator==(const RigidPose &) const = default;
};

} // namespace egogs
