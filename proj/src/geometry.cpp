// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/geometry.hpp"

#include "egogs/camera.hpp"
#include "egogs/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace egogs {

Mat3 quat_to_rotmat(const Vec4 &q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorKind::InvalidInput, "quaternion has zero norm");
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Vec4 quat_to_rotmat_backward(const Vec4 &q, const Mat3 &g) {
    const double n = q.norm();
    const Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Vec4 gu;
    gu[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    gu[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                 w * g(2, 1) - 2 * x * g(2, 2));
    gu[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                 z * g(2, 1) - 2 * y * g(2, 2));
    gu[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
                 x * g(2, 0) + y * g(2, 1));
    // Project out the radial direction of the normalization.
    return (gu - u * u.dot(gu)) / n;
}

Vec4 rotmat_to_quat(const Mat3 &r) {
    const Eigen::Quaterniond q(r);
    Vec4 out(q.w(), q.x(), q.y(), q.z());
    if (out[0] < 0) out = -out;
    return out;
}

Vec4 quat_multiply(const Vec4 &a, const Vec4 &b) {
    return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Mat3 build_covariance(const Vec3 &log_scale, const Vec4 &q) {
    const Mat3 m = quat_to_rotmat(q) * log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

namespace {

// Relative size below which the second 6D vector counts as parallel.
constexpr double kDegenerate6d = 1e-9;

struct GramSchmidt {
    Vec3 b1, b2, b3, u;
    double n1 = 0.0, n2 = 0.0;
};

GramSchmidt gram_schmidt(const Vec6 &r6) {
    GramSchmidt gs;
    const Vec3 a1 = r6.head<3>(), a2 = r6.tail<3>();
    gs.n1 = a1.norm();
    if (!(gs.n1 > 0.0) || !std::isfinite(gs.n1))
        throw Error(ErrorKind::InvalidInput, "6D rotation: first vector is zero");
    gs.b1 = a1 / gs.n1;
    gs.u = a2 - gs.b1.dot(a2) * gs.b1;
    gs.n2 = gs.u.norm();
    if (!(gs.n2 > kDegenerate6d * std::max(1.0, a2.norm())) || !std::isfinite(gs.n2))
        throw Error(ErrorKind::InvalidInput, "6D rotation: vectors are parallel or zero");
    gs.b2 = gs.u / gs.n2;
    gs.b3 = gs.b1.cross(gs.b2);
    return gs;
}

} // namespace

Mat3 sixd_to_rotmat(const Vec6 &r6) {
    const GramSchmidt gs = gram_schmidt(r6);
    Mat3 r;
    r.col(0) = gs.b1;
    r.col(1) = gs.b2;
    r.col(2) = gs.b3;
    return r;
}

Vec6 sixd_to_rotmat_backward(const Vec6 &r6, const Mat3 &g) {
    const GramSchmidt gs = gram_schmidt(r6);
    const Vec3 a2 = r6.tail<3>();
    Vec3 gb1 = g.col(0) + gs.b2.cross(g.col(2));
    const Vec3 gb2 = g.col(1) + g.col(2).cross(gs.b1);
    const Vec3 gu = (gb2 - gs.b2 * gs.b2.dot(gb2)) / gs.n2;
    const Vec3 ga2 = gu - gs.b1 * gs.b1.dot(gu);
    gb1 -= gs.b1.dot(a2) * gu + a2 * gs.b1.dot(gu);
    const Vec3 ga1 = (gb1 - gs.b1 * gs.b1.dot(gb1)) / gs.n1;
    Vec6 out;
    out << ga1, ga2;
    return out;
}

Vec6 rotmat_to_sixd(const Mat3 &r) {
    Vec6 out;
    out << r.col(0), r.col(1);
    return out;
}

Mat3 pose_rotation(const RigidPose &pose) { return sixd_to_rotmat(pose.rot6d); }

GaussianCloud apply_rigid(const GaussianCloud &cloud, const RigidPose &pose) {
    const Mat3 r = pose_rotation(pose);
    const Vec4 qr = rotmat_to_quat(r);
    GaussianCloud out = cloud;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.positions[i] = r * cloud.positions[i] + pose.translation;
        out.rotations[i] = quat_multiply(qr, cloud.rotations[i]).normalized();
    }
    return out;
}

Vec3 transform_point(const RigidPose &pose, const Vec3 &x) { return pose_rotation(pose) * x + pose.translation; }

RigidPose make_pose(const Mat3 &rotation, const Vec3 &translation, int reference) {
    RigidPose p;
    p.rot6d = rotmat_to_sixd(rotation);
    p.translation = translation;
    p.reference_frame_index = reference;
    return p;
}

RigidPose inverse(const RigidPose &pose) {
    const Mat3 rt = pose_rotation(pose).transpose();
    return make_pose(rt, -(rt * pose.translation), pose.reference_frame_index);
}

RigidPose compose(const RigidPose &second, const RigidPose &first) {
    const Mat3 r2 = pose_rotation(second), r1 = pose_rotation(first);
    return make_pose(r2 * r1, r2 * first.translation + second.translation, first.reference_frame_index);
}

double geodesic_angle(const Mat3 &a, const Mat3 &b) {
    const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

Vec3 centroid(const GaussianCloud &cloud) {
    Vec3 c = Vec3::Zero();
    if (cloud.empty()) return c;
    for (const auto &p : cloud.positions) c += p;
    return c / static_cast<double>(cloud.size());
}

Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, const Intrinsics &intrinsics, int width,
               int height) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.intrinsics = intrinsics;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

void check_rotation(const Mat3 &r, double tol, const char *what) {
    if (!r.allFinite()) throw Error(ErrorKind::InvalidInput, std::string(what) + ": non-finite rotation");
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = r.determinant();
    if (ortho > tol || std::abs(det - 1.0) > tol)
        throw Error(ErrorKind::InvalidInput, std::string(what) + ": not in SO(3) (det=" + std::to_string(det) +
                                                 ", |RtR-I|=" + std::to_string(ortho) + ")");
}

} // namespace egogs
