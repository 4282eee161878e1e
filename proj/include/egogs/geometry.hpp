// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/gaussian_cloud.hpp"
#include "egogs/pose.hpp"
#include "egogs/types.hpp"

namespace egogs {

/// Rotation matrix of a (not necessarily normalized) quaternion (w, x, y, z).
/// Throws Error(InvalidInput) for the zero quaternion.
Mat3 quat_to_rotmat(const Vec4 &q);

/// Given dL/dR for R = quat_to_rotmat(q), returns dL/dq for the raw
/// (unnormalized) quaternion.
Vec4 quat_to_rotmat_backward(const Vec4 &q, const Mat3 &grad_r);

Vec4 rotmat_to_quat(const Mat3 &r);
Vec4 quat_multiply(const Vec4 &a, const Vec4 &b);

/// Sigma = (R S)(R S)^T with S = diag(exp(log_scale)).
Mat3 build_covariance(const Vec3 &log_scale, const Vec4 &q);

/// Gram-Schmidt on the two 3-vectors of `r6`; third column by cross product.
/// Throws Error(InvalidInput) when the first vector is zero or the second is
/// parallel to it.
Mat3 sixd_to_rotmat(const Vec6 &r6);
Vec6 sixd_to_rotmat_backward(const Vec6 &r6, const Mat3 &grad_r);
Vec6 rotmat_to_sixd(const Mat3 &r);

Mat3 pose_rotation(const RigidPose &pose);

/// Applies one rigid transform about the world origin to every Gaussian:
/// centers are rotated then translated, orientations are pre-multiplied by the
/// rotation so each covariance becomes R Sigma R^T.
GaussianCloud apply_rigid(const GaussianCloud &cloud, const RigidPose &pose);

Vec3 transform_point(const RigidPose &pose, const Vec3 &x);

RigidPose inverse(const RigidPose &pose);
/// `second` after `first`: x -> second(first(x)). Reference frame taken from `first`.
RigidPose compose(const RigidPose &second, const RigidPose &first);

RigidPose make_pose(const Mat3 &rotation, const Vec3 &translation, int reference = 0);

/// Angle in radians of R_a^T R_b.
double geodesic_angle(const Mat3 &a, const Mat3 &b);

Vec3 centroid(const GaussianCloud &cloud);

} // namespace egogs
