// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/camera.hpp"
#include "egogs/gaussian_cloud.hpp"
#include "egogs/image.hpp"
#include "egogs/pose.hpp"
#include "egogs/types.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace egogs {

namespace raster {
inline constexpr int kTileSize = 16;
inline constexpr double kLowPass = 0.3;          // px^2 added to the 2D covariance diagonal
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kNearPlane = 0.01;
inline constexpr double kCutoffPower = 9.0;      // 3 sigma, squared Mahalanobis distance
inline constexpr double kFovMargin = 1.3;        // Jacobian evaluated within this multiple of the half field of view
} // namespace raster

/// A Gaussian after projection to pixel space.
struct ScreenSplat {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Mat2 conic = Mat2::Identity(); // cov2d^-1
    double depth = 0.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    double label = 0.0;
    double radius = 0.0; // 3 sigma along the major axis, pixels
    int source = -1;     // index of the Gaussian it came from
};

/// Footprint of a splat: alpha = min(0.99, opacity * kernel(q)), q the squared
/// Mahalanobis distance. Equal to exp(-q/2) within 2 sigma; beyond that a
/// smoothstep window brings it to zero at 3 sigma so alpha is C1 everywhere.
double splat_kernel(double q);
double splat_kernel_derivative(double q);

/// Projects Gaussians to screen space. Splats behind the near plane or whose
/// 3 sigma footprint misses every pixel center are culled.
std::vector<ScreenSplat> project(const GaussianCloud &cloud, const Camera &camera);

enum class RenderMode { Color, Alpha, Label, All };

struct RasterState;

struct RenderOutput {
    int width = 0;
    int height = 0;
    Image color; // H x W x 3
    Image alpha; // H x W x 1
    Image label; // H x W x 1
    /// Splats, tile lists and per-pixel transmittance needed by the backward pass.
    std::shared_ptr<const RasterState> state;
};

/// Tile-based front-to-back compositing on a black background.
RenderOutput render(std::span<const ScreenSplat> splats, int height, int width,
                    RenderMode mode = RenderMode::All);

/// Per-pixel loop over every depth-sorted splat; the correctness oracle for render().
RenderOutput render_naive(std::span<const ScreenSplat> splats, int height, int width);

/// Projects and renders; remembers the source cloud so backward can verify it.
RenderOutput render_cloud(const GaussianCloud &cloud, const Camera &camera, RenderMode mode = RenderMode::All);

/// Upstream gradients dL/d(output). Channels left empty are treated as zero.
struct RenderGrads {
    Image color;
    Image alpha;
    Image label;
};

/// dL/d(splat field), one entry per input splat in input order.
struct SplatGradients {
    std::vector<Vec2> mean2d;
    std::vector<Mat2> conic; // w.r.t. each entry of the symmetric inverse covariance
    std::vector<double> opacity;
    std::vector<Vec3> color;
    std::vector<double> label;
};

SplatGradients rasterize_backward(const RenderOutput &output, const RenderGrads &grads);

struct CloudGradients {
    std::vector<Vec3> positions;
    std::vector<Vec3> log_scales;
    std::vector<Vec4> rotations;
    std::vector<double> opacity_logits;
    std::vector<Vec3> colors;
    std::vector<double> labels;
    /// dL/dR_i for each Gaussian's rotation matrix; feeds rigid-pose gradients.
    std::vector<Mat3> rotation_matrices;
    /// Norm of the screen-space mean gradient in normalized device units; 0 when culled.
    std::vector<double> mean2d_ndc_norm;
    std::vector<std::uint8_t> visible;

    explicit CloudGradients(std::size_t n = 0);
    std::size_t size() const { return positions.size(); }
    void add(const CloudGradients &other);
    bool all_finite() const;
};

/// Analytic gradients w.r.t. every field of the cloud that produced `output`.
/// Throws Error(ContractViolation) when the cloud or camera differ from the forward call.
CloudGradients render_backward(const GaussianCloud &cloud, const Camera &camera, const RenderOutput &output,
                               const RenderGrads &grads);

/// Gradient of a shared rigid transform applied as x' = R (x - pivot) + pivot + offset.
struct PoseGradient {
    Vec3 offset = Vec3::Zero();
    Mat3 rotation = Mat3::Zero();
    Vec6 rot6d = Vec6::Zero();
};

/// Pulls gradients of the transformed cloud back through a shared rigid
/// transform. `canonical` is the cloud before the transform; returns gradients
/// w.r.t. the canonical fields and fills `pose_grad`.
CloudGradients rigid_backward(const GaussianCloud &canonical, const Mat3 &rotation, const Vec3 &pivot,
                              const CloudGradients &posed, PoseGradient &pose_grad, const Vec6 *rot6d = nullptr);

} // namespace egogs
