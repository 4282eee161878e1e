// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"
#include "egogs/pose_track.hpp"
#include "test_util.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

namespace egogs {
namespace {

using testing::rot_z;

PoseTrack two_knots(const RigidPose &a, const RigidPose &b, int fa = 0, int fb = 2) {
    PoseTrack t;
    t.knots = {{fa, a}, {fb, b}};
    return t;
}

TEST(Interpolate, ExactAtKnots) {
    std::mt19937_64 rng(1);
    PoseTrack t;
    t.pivot = Vec3(0.2, 0.1, -0.3);
    std::normal_distribution<double> n;
    for (int k = 0; k < 6; ++k) {
        RigidPose p;
        for (int a = 0; a < 6; ++a) p.rot6d[a] = n(rng);
        p.translation = testing::random_vec3(rng, -1, 1);
        t.knots.push_back({10 + 3 * k, p});
    }
    for (const auto &k : t.knots) EXPECT_EQ(interpolate_pose(t, k.frame_index), k.pose);
}

TEST(Interpolate, HalfwayRotationAndTranslation) {
    const RigidPose a = RigidPose::identity();
    const RigidPose b = make_pose(rot_z(M_PI / 2), Vec3(2.0, -4.0, 6.0));
    const RigidPose mid = interpolate_pose(two_knots(a, b), 1.0);
    EXPECT_NEAR((pose_rotation(mid) - rot_z(M_PI / 4)).norm(), 0.0, 1e-12);
    EXPECT_NEAR((mid.translation - Vec3(1.0, -2.0, 3.0)).norm(), 0.0, 1e-12);
}

TEST(Interpolate, PivotMovesLinearlyAndRotationIsGeodesic) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        PoseTrack t;
        t.pivot = testing::random_vec3(rng, -1, 1);
        const Mat3 ra = quat_to_rotmat(testing::random_quat(rng));
        // Relative rotation below 180 degrees so the geodesic is unique.
        const Vec3 axis = testing::random_vec3(rng, -1, 1).normalized();
        const double angle = std::uniform_real_distribution<double>(0.01, 3.0)(rng);
        const Mat3 rb = Eigen::AngleAxisd(angle, axis).toRotationMatrix() * ra;
        t.knots = {{4, make_pose(ra, testing::random_vec3(rng, -1, 1))}, {10, make_pose(rb, testing::random_vec3(rng, -1, 1))}};
        const double s = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const RigidPose p = interpolate_pose(t, 4 + 6 * s);
        const Mat3 r = pose_rotation(p);
        EXPECT_NEAR(geodesic_angle(r, ra), s * angle, 1e-9);
        EXPECT_NEAR(geodesic_angle(r, rb), (1 - s) * angle, 1e-9);
        const Vec3 ca = transform_point(t.knots[0].pose, t.pivot), cb = transform_point(t.knots[1].pose, t.pivot);
        EXPECT_NEAR((transform_point(p, t.pivot) - ((1 - s) * ca + s * cb)).norm(), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(r.determinant() - 1.0), 0.0, 1e-12);
    }
}

TEST(Interpolate, OutOfRange) {
    const PoseTrack t = two_knots(RigidPose::identity(), RigidPose::identity(), 3, 9);
    for (double f : {2.999, 9.001, -1.0}) {
        try {
            interpolate_pose(t, f);
            FAIL();
        } catch (const Error &e) {
            EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
        }
    }
    EXPECT_THROW(interpolate_pose(PoseTrack{}, 0.0), Error);
}

TEST(PoseAtFrame, HoldsOutsideTheTrack) {
    const RigidPose b = make_pose(rot_z(0.3), Vec3(1, 0, 0));
    const PoseTrack t = two_knots(make_pose(rot_z(0.1), Vec3::Zero()), b, 5, 9);
    EXPECT_EQ(pose_at_frame(t, 2), RigidPose::identity());
    EXPECT_EQ(pose_at_frame(t, 9), b);
    EXPECT_EQ(pose_at_frame(t, 50), b);
    EXPECT_EQ(pose_at_frame(PoseTrack{}, 4), RigidPose::identity());
    EXPECT_EQ(t.find(9), 1);
    EXPECT_EQ(t.find(7), -1);
}

} // namespace
} // namespace egogs
