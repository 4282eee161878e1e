// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/camera.hpp"
#include "egogs/gaussian_cloud.hpp"
#include "egogs/geometry.hpp"
#include "egogs/types.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace egogs::testing {

inline Vec4 random_quat(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized();
}

inline Vec3 random_vec3(std::mt19937_64 &rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return Vec3(u(rng), u(rng), u(rng));
}

/// Camera at the origin looking down +z.
inline Camera axis_camera(int width, int height, double focal) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.intrinsics = {focal, focal, (width - 1) / 2.0, (height - 1) / 2.0};
    return cam;
}

/// Random Gaussians in front of `axis_camera`, spread over the image.
inline GaussianCloud random_cloud(std::mt19937_64 &rng, int n, double depth_lo, double depth_hi, double spread,
                                  double scale_lo, double scale_hi, double opacity_lo = 0.2,
                                  double opacity_hi = 0.9) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GaussianCloud c;
    for (int i = 0; i < n; ++i) {
        const double z = depth_lo + (depth_hi - depth_lo) * u(rng);
        const Vec3 pos((u(rng) - 0.5) * spread * z, (u(rng) - 0.5) * spread * z, z);
        const Vec3 ls(std::log(scale_lo + (scale_hi - scale_lo) * u(rng)),
                      std::log(scale_lo + (scale_hi - scale_lo) * u(rng)),
                      std::log(scale_lo + (scale_hi - scale_lo) * u(rng)));
        const double op = opacity_lo + (opacity_hi - opacity_lo) * u(rng);
        c.push_back(pos, ls, random_quat(rng), inverse_sigmoid(op), Vec3(u(rng), u(rng), u(rng)),
                    2.0 * u(rng) - 1.0);
    }
    return c;
}

inline Mat3 rot_z(double radians) {
    return Eigen::AngleAxisd(radians, Vec3::UnitZ()).toRotationMatrix();
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("egogs_" + tag + "_" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    const std::filesystem::path &path() const { return path_; }

  private:
    std::filesystem::path path_;
};

} // namespace egogs::testing
