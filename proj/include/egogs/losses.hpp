// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/camera.hpp"
#include "egogs/image.hpp"

#include <optional>
#include <span>
#include <vector>

namespace egogs {

/// A scalar loss and its gradient w.r.t. the rendered image it was given.
struct ImageLoss {
    double value = 0.0;
    Image grad;
};

/// SSIM window and constants (11x11 Gaussian, sigma 1.5, data range 1).
struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// (1 - lambda) * L1 + lambda * (1 - SSIM) / 2 over pixels with keep = 1.
/// Masked target pixels carry no supervision: they are replaced by the render
/// before either term is evaluated, and the returned gradient is exactly zero
/// there. An all-zero mask yields zero loss and zero gradient.
ImageLoss masked_photometric(const Image &render, const Image &target, const Mask &keep, double lambda_dssim = 0.2);

/// Mean per-Gaussian binary entropy of opacities in (0, 1); gradient w.r.t. each opacity.
struct EntropyLoss {
    double value = 0.0;
    std::vector<double> grad;
};
EntropyLoss entropy_loss(std::span<const double> opacities);
/// Same loss evaluated from opacity logits; gradient w.r.t. the logits.
EntropyLoss entropy_loss_from_logits(std::span<const double> logits);

/// Mean binary cross-entropy of sigmoid(rendered label) against the object
/// mask, over pixels where `keep` is set (all pixels when absent).
ImageLoss bce_label_loss(const Image &rendered_label, const Mask &object_mask, const Mask *keep = nullptr);

struct ObjectLoss {
    double value = 0.0;
    Image grad_color;
    Image grad_alpha;
};

/// L1(image * object_mask, render) + lambda * MSE(object_mask, alpha), both
/// averaged over pixels kept by `keep`. Throws Error(ContractViolation) when the
/// frame has no object mask.
ObjectLoss object_loss(const Image &render_color, const Image &render_alpha, const CameraFrame &frame,
                       const Mask &keep, double lambda = 0.5);

inline constexpr double kPsnrCap = 100.0;

/// PSNR in dB over kept pixels, capped at kPsnrCap; nullopt when nothing is kept.
std::optional<double> psnr(const Image &render, const Image &target, const Mask &keep);
/// Mean SSIM over kept window centers and channels; nullopt when nothing is kept.
std::optional<double> ssim(const Image &render, const Image &target, const Mask &keep,
                           const SsimParams &params = {});
/// SSIM and its gradient w.r.t. `render` (target taken as given).
ImageLoss ssim_with_grad(const Image &render, const Image &target, const Mask &keep, const SsimParams &params = {});

/// Normalized 1D Gaussian taps.
std::vector<double> gaussian_taps(int window, double sigma);

} // namespace egogs
