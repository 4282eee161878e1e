// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace egogs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d; // quaternions, stored (w, x, y, z)
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

} // namespace egogs
