// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/synthetic.hpp"

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"
#include "egogs/model_io.hpp"
#include "egogs/rasterizer.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace egogs {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
const Vec3 kTarget(0.0, 0.0, 0.08);
const Vec3 kSkin(0.86, 0.63, 0.52);

Vec3 clamp01(const Vec3 &c) { return c.cwiseMax(0.0).cwiseMin(1.0); }

Vec3 floor_color(double x, double y) {
    Vec3 c(0.56, 0.46, 0.36);
    c += 0.10 * std::sin(2 * kPi * x / 0.45) * std::cos(2 * kPi * y / 0.6) * Vec3(1.0, 0.8, 0.6);
    const bool tile = (static_cast<int>(std::floor(x / 0.3)) + static_cast<int>(std::floor(y / 0.3))) % 2 == 0;
    if (tile) c += Vec3(0.05, 0.04, 0.02);
    // Distinct patch under the object's resting place; revealed when it moves.
    if (std::abs(x) < 0.18 && std::abs(y) < 0.14) c = Vec3(0.20, 0.38, 0.70) + 0.08 * std::sin(2 * kPi * x / 0.12) * Vec3(1, 1, 0.3);
    return clamp01(c);
}

Vec3 back_wall_color(double x, double z) {
    Vec3 c(0.76, 0.73, 0.66);
    c += 0.08 * std::sin(2 * kPi * x / 0.35) * Vec3(0.6, 0.6, 1.0);
    if (x > -0.55 && x < -0.05 && z > 0.35 && z < 0.75) c = Vec3(0.72, 0.30, 0.28) + 0.1 * std::cos(2 * kPi * z / 0.2) * Vec3(1, 0.5, 0.2);
    return clamp01(c);
}

Vec3 side_wall_color(double y, double z) {
    Vec3 c(0.58, 0.69, 0.58);
    c += 0.09 * std::cos(2 * kPi * z / 0.28) * Vec3(0.4, 1.0, 0.6) + 0.05 * std::sin(2 * kPi * y / 0.5) * Vec3(1, 1, 1);
    return clamp01(c);
}

// Flat Gaussians on a rectangle spanned by `u_axis` and `v_axis` from `origin`.
void add_plane(GaussianCloud &cloud, const Vec3 &origin, const Vec3 &u_axis, const Vec3 &v_axis, double u_len,
               double v_len, double spacing, double thickness, double opacity,
               const std::function<Vec3(double, double)> &color) {
    const Vec3 normal = u_axis.cross(v_axis).normalized();
    Mat3 r;
    r.col(0) = u_axis.normalized();
    r.col(1) = v_axis.normalized();
    r.col(2) = normal;
    const Vec4 q = rotmat_to_quat(r);
    const int nu = std::max(1, static_cast<int>(std::round(u_len / spacing)));
    const int nv = std::max(1, static_cast<int>(std::round(v_len / spacing)));
    const double du = u_len / nu, dv = v_len / nv;
    const Vec3 log_scale(std::log(0.65 * du), std::log(0.65 * dv), std::log(thickness));
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            const double u = (i + 0.5) * du, v = (j + 0.5) * dv;
            const Vec3 p = origin + u * u_axis.normalized() + v * v_axis.normalized();
            cloud.push_back(p, log_scale, q, inverse_sigmoid(opacity), color(u, v), 0.0);
        }
}

GaussianCloud build_room(const SyntheticSceneSpec &s) {
    GaussianCloud c;
    const double t = 0.004;
    add_plane(c, Vec3(-1.0, -1.0, 0.0), Vec3::UnitX(), Vec3::UnitY(), 2.0, 2.0, s.room_spacing, t, 0.98,
              [](double u, double v) { return floor_color(u - 1.0, v - 1.0); });
    add_plane(c, Vec3(-1.0, 1.0, 0.0), Vec3::UnitX(), Vec3::UnitZ(), 2.0, 1.0, s.room_spacing, t, 0.98,
              [](double u, double v) { return back_wall_color(u - 1.0, v); });
    add_plane(c, Vec3(-1.0, -1.0, 0.0), Vec3::UnitY(), Vec3::UnitZ(), 2.0, 1.0, s.room_spacing, t, 0.98,
              [](double u, double v) { return side_wall_color(u - 1.0, v); });
    return c;
}

GaussianCloud build_object(const SyntheticSceneSpec &s) {
    GaussianCloud c;
    const Vec3 half = s.object_size / 2.0;
    const Vec3 center(kTarget.x(), kTarget.y(), half.z() + 0.003);
    const double sp = s.object_spacing, t = 0.003;
    auto face_color = [](Vec3 base, double stripe) {
        return [base, stripe](double u, double v) {
            return clamp01(base + 0.12 * std::sin(2 * kPi * u / stripe) * Vec3(1, 1, 1) +
                           0.06 * std::cos(2 * kPi * v / 0.07) * Vec3(0.5, 1.0, 0.2));
        };
    };
    const Vec3 lo = center - half;
    const Vec3 ex(s.object_size.x(), 0, 0), ey(0, s.object_size.y(), 0), ez(0, 0, s.object_size.z());
    // Top, four sides; the bottom is never visible.
    add_plane(c, lo + ez, Vec3::UnitX(), Vec3::UnitY(), ex.x(), ey.y(), sp, t, 0.97, face_color(Vec3(0.90, 0.78, 0.20), 0.09));
    add_plane(c, lo, Vec3::UnitX(), Vec3::UnitZ(), ex.x(), ez.z(), sp, t, 0.97, face_color(Vec3(0.80, 0.22, 0.18), 0.07));
    add_plane(c, lo + ey, Vec3::UnitX(), Vec3::UnitZ(), ex.x(), ez.z(), sp, t, 0.97, face_color(Vec3(0.25, 0.62, 0.30), 0.07));
    add_plane(c, lo, Vec3::UnitY(), Vec3::UnitZ(), ey.y(), ez.z(), sp, t, 0.97, face_color(Vec3(0.15, 0.25, 0.55), 0.06));
    add_plane(c, lo + ex, Vec3::UnitY(), Vec3::UnitZ(), ey.y(), ez.z(), sp, t, 0.97, face_color(Vec3(0.60, 0.20, 0.60), 0.06));
    return c;
}

Vec3 camera_eye(const SyntheticSceneSpec &s, int f) {
    const double a = s.num_frames > 1 ? static_cast<double>(f) / (s.num_frames - 1) : 0.0;
    const double theta = (-45.0 - s.arc_degrees / 2.0 + a * s.arc_degrees) * kPi / 180.0;
    return kTarget + Vec3(s.camera_radius * std::cos(theta), s.camera_radius * std::sin(theta),
                          s.camera_height + 0.05 * std::sin(2 * kPi * a));
}

void scale_cloud(GaussianCloud &c, double k) {
    for (auto &p : c.positions) p *= k;
    for (auto &l : c.log_scales) l.array() += std::log(k);
}

// Paints a hand disc and a forearm capsule reaching to the bottom edge; returns the keep mask.
Mask paint_arm(Image &img, const Vec2 &hand, double radius) {
    Mask keep(img.width, img.height, 1);
    if (radius <= 0.0) return keep;
    const Vec2 elbow(hand.x() + 2.5 * radius, img.height + 2.0 * radius);
    const double arm_r = 0.75 * radius;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Vec2 p(x, y);
            const Vec2 d = elbow - hand;
            const double t = std::clamp((p - hand).dot(d) / d.squaredNorm(), 0.0, 1.0);
            const bool in_arm = (p - (hand + t * d)).norm() <= arm_r;
            const bool in_hand = (p - hand).norm() <= radius;
            if (!in_arm && !in_hand) continue;
            keep.at(x, y) = 0;
            const Vec3 c = kSkin * (0.85 + 0.15 * (1.0 - static_cast<double>(y) / img.height));
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = c[ch];
        }
    return keep;
}

bool has_mask(const SyntheticSceneSpec &s, int f) {
    for (const auto &it : s.interactions)
        if (f >= it.onset - s.mask_margin && f <= it.offset + s.mask_margin) return true;
    return false;
}

bool moves(const SyntheticSceneSpec &s) {
    return s.velocity.norm() > 0.0 || s.rotation_deg_per_frame != 0.0 || s.lift != 0.0;
}

} // namespace

std::vector<RigidPose> object_trajectory(const SyntheticSceneSpec &s, const Vec3 &pivot) {
    std::vector<RigidPose> poses(s.num_frames);
    const Vec3 axis = s.rotation_axis.normalized();
    for (int f = 0; f < s.num_frames; ++f) {
        Mat3 r = Mat3::Identity();
        Vec3 t = Vec3::Zero();
        for (const auto &it : s.interactions) {
            if (f <= it.onset) break;
            const int span = std::max(1, it.offset - it.onset);
            const int j = std::min(f, it.offset) - it.onset;
            const Vec3 c = r * pivot + t; // centroid at the start of this interaction
            const Mat3 dr = Eigen::AngleAxisd(j * s.rotation_deg_per_frame * kPi / 180.0, axis).toRotationMatrix();
            const Vec3 d = j * s.velocity + s.lift * std::sin(kPi * j / span) * Vec3::UnitZ();
            // x' = dr (x - c) + c + d applied after the previous pose.
            r = dr * r;
            t = dr * (t - c) + c + d;
        }
        poses[f] = make_pose(r, t);
    }
    return poses;
}

SyntheticScene generate_synthetic(const SyntheticSceneSpec &spec) {
    if (spec.num_frames < 2 || spec.width < 8 || spec.height < 8)
        throw Error(ErrorKind::InvalidInput, "synthetic scene needs at least 2 frames of 8x8 pixels");
    if (spec.train_stride < 1) throw Error(ErrorKind::InvalidInput, "train_stride must be at least 1");
    SyntheticSceneSpec s = spec;
    if (!moves(s)) s.interactions.clear();
    std::mt19937_64 rng(s.seed);

    GaussianCloud room = build_room(s);
    GaussianCloud object = build_object(s);
    std::vector<Vec3> eyes;
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (int f = 0; f < s.num_frames; ++f) {
        eyes.push_back(camera_eye(s, f));
        lo = lo.cwiseMin(eyes.back());
        hi = hi.cwiseMax(eyes.back());
    }
    const double diag = (hi - lo).norm();
    const double k = diag > 0 ? 1.0 / diag : 1.0;
    scale_cloud(room, k);
    scale_cloud(object, k);
    for (auto &e : eyes) e *= k;
    const Vec3 target = kTarget * k;

    SyntheticScene out;
    out.scale = k;
    out.truth.background = room;
    out.truth.object = object;
    out.truth.track.pivot = centroid(object);
    out.truth.track.step = 1;
    const auto poses = object_trajectory(s, out.truth.track.pivot);
    for (int f = 0; f < s.num_frames; ++f) out.truth.track.knots.push_back({f, poses[f]});
    out.truth.metadata["generator.seed"] = std::to_string(s.seed);
    out.truth.metadata["generator.scale"] = std::to_string(k);

    const Intrinsics intr{s.focal, s.focal, (s.width - 1) / 2.0, (s.height - 1) / 2.0};
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<CameraFrame> frames;
    for (int f = 0; f < s.num_frames; ++f) {
        CameraFrame fr;
        fr.frame_index = f;
        fr.train = f % s.train_stride == 0;
        fr.camera = look_at(eyes[f], target, Vec3::UnitZ(), intr, s.width, s.height);
        const GaussianCloud posed = apply_rigid(object, poses[f]);
        GaussianCloud scene = room;
        scene.append(posed);
        fr.image = render_naive(project(scene, fr.camera), s.height, s.width).color;
        const RenderOutput obj = render_naive(project(posed, fr.camera), s.height, s.width);

        // Hand: on the object's near edge during interactions, wandering otherwise.
        Vec2 hand(s.width * (0.5 + 0.3 * std::sin(0.13 * f)), s.height * (0.78 + 0.12 * std::sin(0.21 * f + 1.0)));
        for (const auto &it : s.interactions)
            if (f >= it.onset && f <= it.offset) {
                const Vec3 pc = fr.camera.to_camera(transform_point(poses[f], out.truth.track.pivot));
                hand = Vec2(intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy + 1.2 * s.body_radius);
            }
        fr.body_mask = paint_arm(fr.image, hand, s.body_radius);
        if (s.noise > 0.0)
            for (auto &v : fr.image.data) v = std::clamp(v + s.noise * noise(rng), 0.0, 1.0);
        if (has_mask(s, f)) {
            Mask m(s.width, s.height, 0);
            for (std::size_t p = 0; p < m.pixels(); ++p) m.data[p] = obj.alpha.data[p] > 0.5 ? 1 : 0;
            fr.object_mask = std::move(m);
        }
        frames.push_back(std::move(fr));
    }

    PointSet points;
    GaussianCloud all = room;
    all.append(object);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (u(rng) >= s.init_fraction) continue;
        points.positions.push_back(all.positions[i] + s.init_jitter * Vec3(noise(rng), noise(rng), noise(rng)));
        points.colors.push_back(clamp01(all.colors[i] + 0.05 * Vec3(noise(rng), noise(rng), noise(rng))));
    }
    out.dataset = make_dataset(std::move(frames), s.interactions, std::move(points));
    out.dataset.units = "camera trajectory bounding box has unit diagonal";
    return out;
}

fs::path write_synthetic(const SyntheticScene &scene, const fs::path &dir) {
    const fs::path manifest = save_dataset(scene.dataset, dir);
    export_model(scene.truth, dir / "ground_truth");
    return manifest;
}

SceneModel read_ground_truth(const fs::path &dataset_dir) { return import_model(dataset_dir / "ground_truth"); }

} // namespace egogs
