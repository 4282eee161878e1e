// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/rasterizer.hpp"

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace egogs {

using namespace raster;

namespace {

// The footprint is the exact Gaussian out to 2 sigma, then a smoothstep
// window takes it to zero at 3 sigma with a continuous first derivative.
constexpr double kTaperStart = 4.0;
constexpr double kTaperWidth = kCutoffPower - kTaperStart;

struct SourceFingerprint {
    std::size_t count = 0;
    double checksum = 0.0;
    Camera camera;
    bool valid = false;
};

double position_checksum(const GaussianCloud &cloud) {
    double s = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double w = 1.0 + 1e-3 * static_cast<double>(i % 97);
        s += w * (cloud.positions[i].sum() + cloud.log_scales[i].sum() + cloud.rotations[i].sum());
    }
    return s;
}

} // namespace

struct RasterState {
    std::vector<ScreenSplat> splats;
    std::vector<int> order;             // splat indices sorted front to back
    std::vector<int> tile_offsets;      // tiles_x*tiles_y + 1 entries into tile_entries
    std::vector<int> tile_entries;      // splat indices, each tile's run sorted front to back
    std::vector<double> final_transmittance;
    std::vector<int> contributor_end;   // per pixel: one past the last processed entry of its list
    int tiles_x = 0;
    int tiles_y = 0;
    bool tiled = true;
    SourceFingerprint source;
};

double splat_kernel(double q) {
    if (!(q < kCutoffPower)) return 0.0;
    const double g = std::exp(-0.5 * q);
    if (q <= kTaperStart) return g;
    const double t = (q - kTaperStart) / kTaperWidth;
    return g * (1.0 - t * t * (3.0 - 2.0 * t));
}

double splat_kernel_derivative(double q) {
    if (!(q < kCutoffPower)) return 0.0;
    const double g = std::exp(-0.5 * q);
    if (q <= kTaperStart) return -0.5 * g;
    const double t = (q - kTaperStart) / kTaperWidth;
    const double w = 1.0 - t * t * (3.0 - 2.0 * t);
    const double dw = -6.0 * t * (1.0 - t) / kTaperWidth;
    return -0.5 * g * w + g * dw;
}

namespace {

double power_at(const ScreenSplat &s, double px, double py) {
    const double dx = px - s.mean2d.x(), dy = py - s.mean2d.y();
    return s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy;
}

// Inclusive pixel range covered by the splat footprint; empty when lo > hi.
void pixel_extent(const ScreenSplat &s, int width, int height, int &x0, int &x1, int &y0, int &y1) {
    x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - s.radius)));
    x1 = std::min(width - 1, static_cast<int>(std::floor(s.mean2d.x() + s.radius)));
    y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - s.radius)));
    y1 = std::min(height - 1, static_cast<int>(std::floor(s.mean2d.y() + s.radius)));
}

std::vector<int> depth_order(std::span<const ScreenSplat> splats) {
    for (const auto &s : splats)
        if (!std::isfinite(s.depth)) throw Error(ErrorKind::ContractViolation, "splat depth is not finite");
    std::vector<int> order(splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
        if (splats[a].source != splats[b].source) return splats[a].source < splats[b].source;
        return a < b;
    });
    return order;
}

struct ProjectionTerms {
    Vec3 p_cam;
    double u = 0.0, v = 0.0; // x/z and y/z, clamped to the widened field of view
    bool clamped_u = false, clamped_v = false;
    Mat23 j;
    Mat23 t;   // J W
    Mat3 rot;  // Gaussian rotation
    Vec3 scale;
    Mat3 cov3d;
    Mat2 cov2d;
};

ProjectionTerms projection_terms(const GaussianCloud &cloud, std::size_t i, const Camera &camera) {
    ProjectionTerms pt;
    const auto &k = camera.intrinsics;
    pt.p_cam = camera.to_camera(cloud.positions[i]);
    const double z = pt.p_cam.z(), x = pt.p_cam.x(), y = pt.p_cam.y();
    // Centers far outside the view keep a bounded footprint: the Jacobian is
    // evaluated at the nearest direction within 1.3x the half field of view.
    const double lim_u = kFovMargin * 0.5 * camera.width / k.fx;
    const double lim_v = kFovMargin * 0.5 * camera.height / k.fy;
    pt.u = std::clamp(x / z, -lim_u, lim_u);
    pt.v = std::clamp(y / z, -lim_v, lim_v);
    pt.clamped_u = pt.u != x / z;
    pt.clamped_v = pt.v != y / z;
    pt.j << k.fx / z, 0.0, -k.fx * pt.u / z, 0.0, k.fy / z, -k.fy * pt.v / z;
    pt.t = pt.j * camera.rotation;
    pt.rot = quat_to_rotmat(cloud.rotations[i]);
    pt.scale = cloud.log_scales[i].array().exp();
    const Mat3 m = pt.rot * pt.scale.asDiagonal();
    pt.cov3d = m * m.transpose();
    pt.cov2d = pt.t * pt.cov3d * pt.t.transpose();
    pt.cov2d(0, 0) += kLowPass;
    pt.cov2d(1, 1) += kLowPass;
    return pt;
}

} // namespace

std::vector<ScreenSplat> project(const GaussianCloud &cloud, const Camera &camera) {
    std::vector<ScreenSplat> out;
    out.reserve(cloud.size());
    const auto &k = camera.intrinsics;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 p_cam = camera.to_camera(cloud.positions[i]);
        if (!(p_cam.z() > kNearPlane)) continue;
        const ProjectionTerms pt = projection_terms(cloud, i, camera);
        ScreenSplat s;
        s.mean2d = Vec2(k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy);
        s.cov2d = pt.cov2d;
        const double det = s.cov2d.determinant();
        if (!(det > 0.0)) continue;
        s.conic << s.cov2d(1, 1) / det, -s.cov2d(0, 1) / det, -s.cov2d(1, 0) / det, s.cov2d(0, 0) / det;
        const double mid = 0.5 * (s.cov2d(0, 0) + s.cov2d(1, 1));
        const double half = 0.5 * (s.cov2d(0, 0) - s.cov2d(1, 1));
        const double lambda_max = mid + std::sqrt(half * half + s.cov2d(0, 1) * s.cov2d(0, 1));
        s.radius = 3.0 * std::sqrt(lambda_max);
        s.depth = p_cam.z();
        s.opacity = cloud.opacity(i);
        s.color = cloud.colors[i];
        s.label = cloud.labels[i];
        s.source = static_cast<int>(i);
        int x0, x1, y0, y1;
        pixel_extent(s, camera.width, camera.height, x0, x1, y0, y1);
        if (x0 > x1 || y0 > y1) continue;
        out.push_back(s);
    }
    return out;
}

namespace {

RenderOutput make_output(int height, int width) {
    RenderOutput out;
    out.width = width;
    out.height = height;
    out.color = Image(width, height, 3);
    out.alpha = Image(width, height, 1);
    out.label = Image(width, height, 1);
    return out;
}

} // namespace

RenderOutput render(std::span<const ScreenSplat> splats, int height, int width, RenderMode mode) {
    auto state = std::make_shared<RasterState>();
    state->splats.assign(splats.begin(), splats.end());
    state->order = depth_order(splats);
    state->tiles_x = (width + kTileSize - 1) / kTileSize;
    state->tiles_y = (height + kTileSize - 1) / kTileSize;
    const int num_tiles = state->tiles_x * state->tiles_y;

    // Bin in global depth order so every tile's run comes out already sorted.
    std::vector<int> counts(num_tiles, 0);
    auto for_each_tile = [&](const ScreenSplat &s, auto &&fn) {
        int x0, x1, y0, y1;
        pixel_extent(s, width, height, x0, x1, y0, y1);
        if (x0 > x1 || y0 > y1) return;
        for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty)
            for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx) fn(ty * state->tiles_x + tx);
    };
    for (int idx : state->order) for_each_tile(splats[idx], [&](int t) { ++counts[t]; });
    state->tile_offsets.assign(num_tiles + 1, 0);
    for (int t = 0; t < num_tiles; ++t) state->tile_offsets[t + 1] = state->tile_offsets[t] + counts[t];
    state->tile_entries.resize(state->tile_offsets[num_tiles]);
    std::vector<int> cursor(state->tile_offsets.begin(), state->tile_offsets.end() - 1);
    for (int idx : state->order) for_each_tile(splats[idx], [&](int t) { state->tile_entries[cursor[t]++] = idx; });

    RenderOutput out = make_output(height, width);
    state->final_transmittance.assign(static_cast<std::size_t>(width) * height, 1.0);
    state->contributor_end.assign(static_cast<std::size_t>(width) * height, 0);

#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < num_tiles; ++t) {
        const int tx = t % state->tiles_x, ty = t / state->tiles_x;
        const int begin = state->tile_offsets[t], end = state->tile_offsets[t + 1];
        for (int py = ty * kTileSize; py < std::min(height, (ty + 1) * kTileSize); ++py) {
            for (int px = tx * kTileSize; px < std::min(width, (tx + 1) * kTileSize); ++px) {
                double trans = 1.0;
                Vec3 c = Vec3::Zero();
                double a = 0.0, l = 0.0;
                int last = begin;
                for (int e = begin; e < end; ++e) {
                    const ScreenSplat &s = state->splats[state->tile_entries[e]];
                    const double q = power_at(s, px, py);
                    if (!(q < kCutoffPower)) continue;
                    const double alpha = std::min(kMaxAlpha, s.opacity * splat_kernel(q));
                    if (!(alpha > 0.0)) continue;
                    const double w = alpha * trans;
                    c += w * s.color;
                    a += w;
                    l += w * s.label;
                    trans *= 1.0 - alpha;
                    last = e + 1;
                    if (trans < kMinTransmittance) break;
                }
                const std::size_t pix = static_cast<std::size_t>(py) * width + px;
                state->final_transmittance[pix] = trans;
                state->contributor_end[pix] = last;
                if (mode == RenderMode::Color || mode == RenderMode::All)
                    for (int ch = 0; ch < 3; ++ch) out.color.data[pix * 3 + ch] = c[ch];
                if (mode == RenderMode::Alpha || mode == RenderMode::All) out.alpha.data[pix] = a;
                if (mode == RenderMode::Label || mode == RenderMode::All) out.label.data[pix] = l;
            }
        }
    }
    out.state = std::move(state);
    return out;
}

RenderOutput render_naive(std::span<const ScreenSplat> splats, int height, int width) {
    std::vector<ScreenSplat> sorted(splats.begin(), splats.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const ScreenSplat &a, const ScreenSplat &b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.source < b.source;
    });
    RenderOutput out = make_output(height, width);
    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            double trans = 1.0;
            double r = 0, g = 0, b = 0, a = 0, l = 0;
            for (const ScreenSplat &s : sorted) {
                const double dx = px - s.mean2d.x(), dy = py - s.mean2d.y();
                const double q = s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy;
                const double alpha = std::min(kMaxAlpha, s.opacity * splat_kernel(q));
                if (!(alpha > 0.0)) continue;
                r += s.color[0] * alpha * trans;
                g += s.color[1] * alpha * trans;
                b += s.color[2] * alpha * trans;
                a += alpha * trans;
                l += s.label * alpha * trans;
                trans *= 1.0 - alpha;
                if (trans < kMinTransmittance) break;
            }
            out.color.at(px, py, 0) = r;
            out.color.at(px, py, 1) = g;
            out.color.at(px, py, 2) = b;
            out.alpha.at(px, py) = a;
            out.label.at(px, py) = l;
        }
    }
    return out;
}

RenderOutput render_cloud(const GaussianCloud &cloud, const Camera &camera, RenderMode mode) {
    const auto splats = project(cloud, camera);
    RenderOutput out = render(splats, camera.height, camera.width, mode);
    auto state = std::const_pointer_cast<RasterState>(out.state);
    state->source.count = cloud.size();
    state->source.checksum = position_checksum(cloud);
    state->source.camera = camera;
    state->source.valid = true;
    return out;
}

CloudGradients::CloudGradients(std::size_t n)
    : positions(n, Vec3::Zero()), log_scales(n, Vec3::Zero()), rotations(n, Vec4::Zero()),
      opacity_logits(n, 0.0), colors(n, Vec3::Zero()), labels(n, 0.0), rotation_matrices(n, Mat3::Zero()),
      mean2d_ndc_norm(n, 0.0), visible(n, 0) {}

void CloudGradients::add(const CloudGradients &o) {
    for (std::size_t i = 0; i < size(); ++i) {
        positions[i] += o.positions[i];
        log_scales[i] += o.log_scales[i];
        rotations[i] += o.rotations[i];
        opacity_logits[i] += o.opacity_logits[i];
        colors[i] += o.colors[i];
        labels[i] += o.labels[i];
        rotation_matrices[i] += o.rotation_matrices[i];
        mean2d_ndc_norm[i] += o.mean2d_ndc_norm[i];
        visible[i] = visible[i] | o.visible[i];
    }
}

bool CloudGradients::all_finite() const {
    for (std::size_t i = 0; i < size(); ++i) {
        if (!positions[i].allFinite() || !log_scales[i].allFinite() || !rotations[i].allFinite() ||
            !std::isfinite(opacity_logits[i]) || !colors[i].allFinite() || !std::isfinite(labels[i]))
            return false;
    }
    return true;
}

SplatGradients rasterize_backward(const RenderOutput &output, const RenderGrads &grads) {
    if (!output.state) throw Error(ErrorKind::ContractViolation, "render output carries no forward state");
    const RasterState &st = *output.state;
    const int width = output.width, height = output.height;
    const auto check = [&](const Image &img, int ch, const char *name) {
        if (img.data.empty()) return false;
        if (img.width != width || img.height != height || img.channels != ch)
            throw Error(ErrorKind::ContractViolation, std::string("gradient image shape mismatch: ") + name);
        return true;
    };
    const bool has_c = check(grads.color, 3, "color");
    const bool has_a = check(grads.alpha, 1, "alpha");
    const bool has_l = check(grads.label, 1, "label");

    // Per-entry partial gradients, reduced afterwards in tile order.
    struct Partial {
        Vec2 mean = Vec2::Zero();
        Mat2 conic = Mat2::Zero();
        double opacity = 0.0;
        Vec3 color = Vec3::Zero();
        double label = 0.0;
    };
    std::vector<Partial> partials(st.tile_entries.size());
    const int num_tiles = st.tiles_x * st.tiles_y;

#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < num_tiles; ++t) {
        const int tx = t % st.tiles_x, ty = t / st.tiles_x;
        const int begin = st.tile_offsets[t];
        for (int py = ty * kTileSize; py < std::min(height, (ty + 1) * kTileSize); ++py) {
            for (int px = tx * kTileSize; px < std::min(width, (tx + 1) * kTileSize); ++px) {
                const std::size_t pix = static_cast<std::size_t>(py) * width + px;
                const Vec3 gc = has_c ? Vec3(grads.color.data[pix * 3], grads.color.data[pix * 3 + 1],
                                             grads.color.data[pix * 3 + 2])
                                      : Vec3::Zero();
                const double ga = has_a ? grads.alpha.data[pix] : 0.0;
                const double gl = has_l ? grads.label.data[pix] : 0.0;
                if (gc.isZero(0.0) && ga == 0.0 && gl == 0.0) continue;
                double trans = st.final_transmittance[pix];
                Vec3 behind_c = Vec3::Zero();
                double behind_a = 0.0, behind_l = 0.0;
                for (int e = st.contributor_end[pix] - 1; e >= begin; --e) {
                    const ScreenSplat &s = st.splats[st.tile_entries[e]];
                    const double dx = px - s.mean2d.x(), dy = py - s.mean2d.y();
                    const double q = s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy;
                    if (!(q < kCutoffPower)) continue;
                    const double kern = splat_kernel(q);
                    const double raw = s.opacity * kern;
                    const double alpha = std::min(kMaxAlpha, raw);
                    if (!(alpha > 0.0)) continue;
                    const double one_minus = 1.0 - alpha;
                    trans /= one_minus; // transmittance in front of this splat
                    const double w = alpha * trans;
                    Partial &p = partials[e];
                    p.color += gc * w;
                    p.label += gl * w;
                    const double d_alpha = gc.dot(s.color * trans - behind_c / one_minus) +
                                           ga * (trans - behind_a / one_minus) +
                                           gl * (s.label * trans - behind_l / one_minus);
                    behind_c += s.color * w;
                    behind_a += w;
                    behind_l += s.label * w;
                    if (raw >= kMaxAlpha) continue; // clamped: flat in opacity and shape
                    p.opacity += d_alpha * kern;
                    const double d_q = d_alpha * s.opacity * splat_kernel_derivative(q);
                    const Vec2 delta(dx, dy);
                    p.mean += -2.0 * d_q * (s.conic * delta);
                    p.conic += d_q * (delta * delta.transpose());
                }
            }
        }
    }

    SplatGradients out;
    const std::size_t n = st.splats.size();
    out.mean2d.assign(n, Vec2::Zero());
    out.conic.assign(n, Mat2::Zero());
    out.opacity.assign(n, 0.0);
    out.color.assign(n, Vec3::Zero());
    out.label.assign(n, 0.0);
    for (std::size_t e = 0; e < st.tile_entries.size(); ++e) {
        const int idx = st.tile_entries[e];
        const Partial &p = partials[e];
        out.mean2d[idx] += p.mean;
        out.conic[idx] += p.conic;
        out.opacity[idx] += p.opacity;
        out.color[idx] += p.color;
        out.label[idx] += p.label;
    }
    return out;
}

CloudGradients render_backward(const GaussianCloud &cloud, const Camera &camera, const RenderOutput &output,
                               const RenderGrads &grads) {
    if (!output.state || !output.state->source.valid)
        throw Error(ErrorKind::ContractViolation, "render output was not produced by render_cloud");
    const auto &src = output.state->source;
    if (src.count != cloud.size() || src.checksum != position_checksum(cloud) || !(src.camera == camera))
        throw Error(ErrorKind::ContractViolation, "backward inputs differ from the forward pass");

    const SplatGradients sg = rasterize_backward(output, grads);
    const auto &splats = output.state->splats;
    CloudGradients out(cloud.size());
    const auto &k = camera.intrinsics;

    for (std::size_t si = 0; si < splats.size(); ++si) {
        const ScreenSplat &s = splats[si];
        const auto i = static_cast<std::size_t>(s.source);
        out.visible[i] = 1;
        out.colors[i] += sg.color[si];
        out.labels[i] += sg.label[si];
        out.opacity_logits[i] += sg.opacity[si] * s.opacity * (1.0 - s.opacity);

        const ProjectionTerms pt = projection_terms(cloud, i, camera);
        const double x = pt.p_cam.x(), y = pt.p_cam.y(), z = pt.p_cam.z();

        // conic = cov2d^-1
        const Mat2 g_cov2d = -(s.conic * sg.conic[si] * s.conic);
        // cov2d = T Sigma T^T, T = J W
        const Mat3 g_cov3d = pt.t.transpose() * g_cov2d * pt.t;
        const Mat23 g_t = 2.0 * g_cov2d * pt.t * pt.cov3d;
        const Mat23 g_j = g_t * camera.rotation.transpose();

        Vec3 g_pcam = Vec3::Zero();
        const Vec2 gm = sg.mean2d[si];
        g_pcam.x() += gm.x() * k.fx / z;
        g_pcam.y() += gm.y() * k.fy / z;
        g_pcam.z() += -gm.x() * k.fx * x / (z * z) - gm.y() * k.fy * y / (z * z);
        // J entries as functions of the camera-space center.
        g_pcam.z() += g_j(0, 0) * (-k.fx / (z * z)) + g_j(1, 1) * (-k.fy / (z * z));
        if (pt.clamped_u) {
            g_pcam.z() += g_j(0, 2) * (k.fx * pt.u / (z * z));
        } else {
            g_pcam.z() += g_j(0, 2) * (2.0 * k.fx * x / (z * z * z));
            g_pcam.x() += g_j(0, 2) * (-k.fx / (z * z));
        }
        if (pt.clamped_v) {
            g_pcam.z() += g_j(1, 2) * (k.fy * pt.v / (z * z));
        } else {
            g_pcam.z() += g_j(1, 2) * (2.0 * k.fy * y / (z * z * z));
            g_pcam.y() += g_j(1, 2) * (-k.fy / (z * z));
        }
        out.positions[i] += camera.rotation.transpose() * g_pcam;

        // Sigma = M M^T, M = R diag(s)
        const Mat3 m = pt.rot * pt.scale.asDiagonal();
        const Mat3 g_m = (g_cov3d + g_cov3d.transpose()) * m;
        Vec3 g_scale;
        Mat3 g_rot;
        for (int c = 0; c < 3; ++c) {
            g_scale[c] = g_m.col(c).dot(pt.rot.col(c));
            g_rot.col(c) = g_m.col(c) * pt.scale[c];
        }
        out.log_scales[i] += g_scale.cwiseProduct(pt.scale);
        out.rotation_matrices[i] += g_rot;
        out.rotations[i] += quat_to_rotmat_backward(cloud.rotations[i], g_rot);
        out.mean2d_ndc_norm[i] = Vec2(gm.x() * 0.5 * camera.width, gm.y() * 0.5 * camera.height).norm();
    }
    return out;
}

CloudGradients rigid_backward(const GaussianCloud &canonical, const Mat3 &rotation, const Vec3 &pivot,
                              const CloudGradients &posed, PoseGradient &pose_grad, const Vec6 *rot6d) {
    CloudGradients out = posed;
    pose_grad = PoseGradient{};
    const Mat3 rt = rotation.transpose();
    for (std::size_t i = 0; i < canonical.size(); ++i) {
        const Vec3 &gx = posed.positions[i];
        pose_grad.offset += gx;
        pose_grad.rotation += gx * (canonical.positions[i] - pivot).transpose();
        const Mat3 r_i = quat_to_rotmat(canonical.rotations[i]);
        pose_grad.rotation += posed.rotation_matrices[i] * r_i.transpose();
        out.positions[i] = rt * gx;
        out.rotation_matrices[i] = rt * posed.rotation_matrices[i];
        out.rotations[i] = quat_to_rotmat_backward(canonical.rotations[i], out.rotation_matrices[i]);
    }
    if (rot6d) pose_grad.rot6d = sixd_to_rotmat_backward(*rot6d, pose_grad.rotation);
    return out;
}

} // namespace egogs
