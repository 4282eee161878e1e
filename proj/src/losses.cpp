// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/losses.hpp"

#include "egogs/error.hpp"

#include "egogs/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <limits>

namespace egogs {

namespace {

void require_same(const Image &a, const Image &b, const char *what) {
    if (!a.same_shape(b)) throw Error(ErrorKind::ContractViolation, std::string(what) + ": image shapes differ");
}

void require_mask(const Image &a, const Mask &m, const char *what) {
    if (a.width != m.width || a.height != m.height)
        throw Error(ErrorKind::ContractViolation, std::string(what) + ": mask shape differs from image");
}

// Zero-padded separable filtering of one channel plane.
std::vector<double> blur(const std::vector<double> &plane, int width, int height, const std::vector<double> &taps) {
    const int half = static_cast<int>(taps.size()) / 2;
    std::vector<double> tmp(plane.size(), 0.0), out(plane.size(), 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < width) s += taps[k + half] * plane[static_cast<std::size_t>(y) * width + xx];
            }
            tmp[static_cast<std::size_t>(y) * width + x] = s;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < height) s += taps[k + half] * tmp[static_cast<std::size_t>(yy) * width + x];
            }
            out[static_cast<std::size_t>(y) * width + x] = s;
        }
    return out;
}

std::vector<double> channel(const Image &img, int c) {
    std::vector<double> out(img.pixels());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = img.data[p * img.channels + c];
    return out;
}

// Target with masked pixels replaced by the render.
Image supervised_target(const Image &render, const Image &target, const Mask &keep) {
    Image t = target;
    for (std::size_t p = 0; p < keep.pixels(); ++p)
        if (!keep.data[p])
            for (int c = 0; c < t.channels; ++c) t.data[p * t.channels + c] = render.data[p * t.channels + c];
    return t;
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

} // namespace

std::vector<double> gaussian_taps(int window, double sigma) {
    std::vector<double> taps(window);
    const int half = window / 2;
    double sum = 0.0;
    for (int k = -half; k <= half; ++k) {
        taps[k + half] = std::exp(-(k * k) / (2.0 * sigma * sigma));
        sum += taps[k + half];
    }
    for (auto &t : taps) t /= sum;
    return taps;
}

ImageLoss ssim_with_grad(const Image &render, const Image &target, const Mask &keep, const SsimParams &params) {
    require_same(render, target, "ssim");
    require_mask(render, keep, "ssim");
    ImageLoss out;
    out.grad = Image(render.width, render.height, render.channels);
    const std::size_t kept = keep.count();
    if (kept == 0) return out;
    const auto taps = gaussian_taps(params.window, params.sigma);
    const double c1 = params.k1 * params.k1, c2 = params.k2 * params.k2;
    const int w = render.width, h = render.height, nc = render.channels;
    const double norm = 1.0 / (static_cast<double>(kept) * nc);

    for (int c = 0; c < nc; ++c) {
        const auto x = channel(render, c), y = channel(target, c);
        std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
        for (std::size_t p = 0; p < x.size(); ++p) {
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = blur(x, w, h, taps), my = blur(y, w, h, taps);
        const auto mxx = blur(xx, w, h, taps), myy = blur(yy, w, h, taps), mxy = blur(xy, w, h, taps);
        // Per-center partials of SSIM w.r.t. the raw moments (mu_x, E[x^2], E[xy]).
        std::vector<double> d_mx(x.size(), 0.0), d_mxx(x.size(), 0.0), d_mxy(x.size(), 0.0);
        for (std::size_t p = 0; p < x.size(); ++p) {
            if (!keep.data[p]) continue;
            const double vx = mxx[p] - mx[p] * mx[p];
            const double vy = myy[p] - my[p] * my[p];
            const double cxy = mxy[p] - mx[p] * my[p];
            const double a1 = 2.0 * mx[p] * my[p] + c1, a2 = 2.0 * cxy + c2;
            const double b1 = mx[p] * mx[p] + my[p] * my[p] + c1, b2 = vx + vy + c2;
            const double s = (a1 * a2) / (b1 * b2);
            out.value += s * norm;
            // Partials w.r.t. mu_x, var_x and cov_xy (central moments).
            const double ds_dmu = (2.0 * my[p] * a2) / (b1 * b2) - s * (2.0 * mx[p]) / b1;
            const double ds_dvar = -s / b2;
            const double ds_dcov = 2.0 * a1 / (b1 * b2);
            d_mx[p] = norm * (ds_dmu - 2.0 * mx[p] * ds_dvar - my[p] * ds_dcov);
            d_mxx[p] = norm * ds_dvar;
            d_mxy[p] = norm * ds_dcov;
        }
        const auto g_mx = blur(d_mx, w, h, taps), g_mxx = blur(d_mxx, w, h, taps), g_mxy = blur(d_mxy, w, h, taps);
        for (std::size_t p = 0; p < x.size(); ++p)
            out.grad.data[p * nc + c] = g_mx[p] + 2.0 * x[p] * g_mxx[p] + y[p] * g_mxy[p];
    }
    return out;
}

std::optional<double> ssim(const Image &render, const Image &target, const Mask &keep, const SsimParams &params) {
    if (keep.count() == 0) return std::nullopt;
    require_same(render, target, "ssim");
    require_mask(render, keep, "ssim");
    return ssim_with_grad(render, supervised_target(render, target, keep), keep, params).value;
}

std::optional<double> psnr(const Image &render, const Image &target, const Mask &keep) {
    require_same(render, target, "psnr");
    require_mask(render, keep, "psnr");
    const std::size_t kept = keep.count();
    if (kept == 0) return std::nullopt;
    double se = 0.0;
    for (std::size_t p = 0; p < keep.pixels(); ++p) {
        if (!keep.data[p]) continue;
        for (int c = 0; c < render.channels; ++c) {
            const double d = render.data[p * render.channels + c] - target.data[p * render.channels + c];
            se += d * d;
        }
    }
    const double mse = se / (static_cast<double>(kept) * render.channels);
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

ImageLoss masked_photometric(const Image &render, const Image &target, const Mask &keep, double lambda_dssim) {
    require_same(render, target, "masked_photometric");
    require_mask(render, keep, "masked_photometric");
    ImageLoss out;
    out.grad = Image(render.width, render.height, render.channels);
    const std::size_t kept = keep.count();
    if (kept == 0) return out;
    const Image t = supervised_target(render, target, keep);
    const int nc = render.channels;
    const double norm = 1.0 / (static_cast<double>(kept) * nc);
    double l1 = 0.0;
    for (std::size_t p = 0; p < keep.pixels(); ++p) {
        if (!keep.data[p]) continue;
        for (int c = 0; c < nc; ++c) {
            const std::size_t i = p * nc + c;
            const double d = render.data[i] - t.data[i];
            l1 += std::abs(d) * norm;
            out.grad.data[i] = (1.0 - lambda_dssim) * norm * ((d > 0) - (d < 0));
        }
    }
    out.value = (1.0 - lambda_dssim) * l1;
    if (lambda_dssim != 0.0) {
        const ImageLoss s = ssim_with_grad(render, t, keep);
        out.value += lambda_dssim * 0.5 * (1.0 - s.value);
        for (std::size_t p = 0; p < keep.pixels(); ++p) {
            if (!keep.data[p]) continue;
            for (int c = 0; c < nc; ++c) out.grad.data[p * nc + c] -= lambda_dssim * 0.5 * s.grad.data[p * nc + c];
        }
    }
    return out;
}

EntropyLoss entropy_loss(std::span<const double> opacities) {
    constexpr double eps = 1e-7;
    EntropyLoss out;
    out.grad.assign(opacities.size(), 0.0);
    if (opacities.empty()) return out;
    const double n = static_cast<double>(opacities.size());
    for (std::size_t i = 0; i < opacities.size(); ++i) {
        const double a = std::clamp(opacities[i], eps, 1.0 - eps);
        out.value += (-a * std::log(a) - (1.0 - a) * std::log(1.0 - a)) / n;
        out.grad[i] = std::log((1.0 - a) / a) / n;
    }
    return out;
}

EntropyLoss entropy_loss_from_logits(std::span<const double> logits) {
    EntropyLoss out;
    out.grad.assign(logits.size(), 0.0);
    if (logits.empty()) return out;
    const double n = static_cast<double>(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        const double ls = log_sigmoid(x), lc = log_sigmoid(-x);
        const double a = std::exp(ls), b = std::exp(lc);
        out.value += (-a * ls - b * lc) / n;
        // dH/dx = ln((1-a)/a) * a(1-a) = -x a (1-a)
        out.grad[i] = -x * a * b / n;
    }
    return out;
}

ImageLoss bce_label_loss(const Image &rendered_label, const Mask &object_mask, const Mask *keep) {
    if (rendered_label.channels != 1) throw Error(ErrorKind::ContractViolation, "bce_label_loss: label must be 1 channel");
    require_mask(rendered_label, object_mask, "bce_label_loss");
    if (keep) require_mask(rendered_label, *keep, "bce_label_loss");
    ImageLoss out;
    out.grad = Image(rendered_label.width, rendered_label.height, 1);
    const std::size_t kept = keep ? keep->count() : rendered_label.pixels();
    if (kept == 0) return out;
    const double norm = 1.0 / static_cast<double>(kept);
    for (std::size_t p = 0; p < rendered_label.pixels(); ++p) {
        if (keep && !keep->data[p]) continue;
        const double l = rendered_label.data[p];
        const double m = object_mask.data[p] ? 1.0 : 0.0;
        out.value += -(m * log_sigmoid(l) + (1.0 - m) * log_sigmoid(-l)) * norm;
        out.grad.data[p] = (sigmoid(l) - m) * norm;
    }
    return out;
}

ObjectLoss object_loss(const Image &render_color, const Image &render_alpha, const CameraFrame &frame,
                       const Mask &keep, double lambda) {
    if (!frame.object_mask)
        throw Error(ErrorKind::ContractViolation,
                    "object_loss: frame " + std::to_string(frame.frame_index) + " has no object mask");
    const Mask &om = *frame.object_mask;
    require_same(render_color, frame.image, "object_loss");
    require_mask(render_color, om, "object_loss");
    require_mask(render_color, keep, "object_loss");
    if (render_alpha.channels != 1 || render_alpha.width != render_color.width ||
        render_alpha.height != render_color.height)
        throw Error(ErrorKind::ContractViolation, "object_loss: alpha shape mismatch");
    ObjectLoss out;
    out.grad_color = Image(render_color.width, render_color.height, render_color.channels);
    out.grad_alpha = Image(render_color.width, render_color.height, 1);
    const std::size_t kept = keep.count();
    if (kept == 0) return out;
    const int nc = render_color.channels;
    const double ncol = 1.0 / (static_cast<double>(kept) * nc), npix = 1.0 / static_cast<double>(kept);
    for (std::size_t p = 0; p < keep.pixels(); ++p) {
        if (!keep.data[p]) continue;
        const double m = om.data[p] ? 1.0 : 0.0;
        for (int c = 0; c < nc; ++c) {
            const std::size_t i = p * nc + c;
            const double d = render_color.data[i] - frame.image.data[i] * m;
            out.value += std::abs(d) * ncol;
            out.grad_color.data[i] = ncol * ((d > 0) - (d < 0));
        }
        const double da = render_alpha.data[p] - m;
        out.value += lambda * da * da * npix;
        out.grad_alpha.data[p] = 2.0 * lambda * da * npix;
    }
    return out;
}

} // namespace egogs
