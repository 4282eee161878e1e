// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/camera.hpp"
#include "egogs/config.hpp"
#include "egogs/error.hpp"
#include "egogs/gaussian_cloud.hpp"
#include "egogs/optimizer.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace egogs {

using ProgressFn = std::function<void(const std::string &)>;

/// Error(Divergence) raised by a training loop, carrying the last cloud whose
/// loss and gradients were finite.
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string &what, GaussianCloud checkpoint)
        : Error(ErrorKind::Divergence, what),
          checkpoint_(std::make_shared<const GaussianCloud>(std::move(checkpoint))) {}
    const GaussianCloud &checkpoint() const noexcept { return *checkpoint_; }
    std::shared_ptr<const GaussianCloud> shared_checkpoint() const noexcept { return checkpoint_; }

  private:
    std::shared_ptr<const GaussianCloud> checkpoint_;
};

/// A training frame together with the pixels that supervise it.
struct TrainView {
    const CameraFrame *frame = nullptr;
    Mask keep;
};

/// Pixels outside the body mask after growing the body region by `dilation`.
Mask body_keep(const CameraFrame &frame, int dilation);

/// 1.1 times the largest distance of a camera center from their mean.
double camera_extent(std::span<const TrainView> views);

struct PhotometricPhase {
    int iters = 0;
    double lambda_dssim = 0.2;
    double entropy_weight = 0.0; // > 0 adds the opacity entropy term
    FieldRates rates;
    /// Position rate decays exponentially to this value over `position_lr_steps`
    /// global steps; 0 steps keeps it constant.
    double position_lr_final = 0.0;
    std::int64_t position_lr_steps = 0;
    /// Global index of this phase's first iteration, shared by the densify
    /// schedule and the learning-rate decay.
    std::int64_t step_offset = 0;
    DensifySchedule densify;
    double extent = 1.0;
};

/// Masked L1 + D-SSIM training of `cloud` over `views`, visited in a shuffled
/// order that is redrawn after every pass. A non-finite loss or gradient
/// throws DivergenceError holding the cloud before that iteration.
void train_photometric(GaussianCloud &cloud, OptimizerState &state, std::span<const TrainView> views,
                       const PhotometricPhase &phase, std::mt19937_64 &rng, const ProgressFn &progress = {});

/// Draws frames without replacement and reshuffles once every frame was used.
class FrameSampler {
  public:
    FrameSampler(std::size_t count, std::mt19937_64 &rng) : count_(count), rng_(rng) {}
    std::size_t next();

  private:
    std::size_t count_;
    std::mt19937_64 &rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

} // namespace egogs
