// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/config.hpp"
#include "egogs/dataset.hpp"
#include "egogs/error.hpp"
#include "egogs/scene_model.hpp"
#include "egogs/training.hpp"

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace egogs {

/// A failure inside run_pipeline, tagged with the stage that raised it.
class StageError : public Error {
  public:
    StageError(std::string stage, const Error &cause)
        : Error(cause.kind(), stage + ": " + cause.what()), stage_(std::move(stage)) {
        if (const auto *d = dynamic_cast<const DivergenceError *>(&cause)) checkpoint_ = d->shared_checkpoint();
    }
    const std::string &stage() const noexcept { return stage_; }
    /// Last finite cloud of the diverged training loop, if that was the cause.
    const GaussianCloud *checkpoint() const noexcept { return checkpoint_.get(); }

  private:
    std::string stage_;
    std::shared_ptr<const GaussianCloud> checkpoint_;
};

struct FrameMetrics {
    int frame_index = 0;
    bool dynamic = false;
    std::optional<double> psnr;
    std::optional<double> ssim;
    std::optional<double> object_psnr; // object-mask region, dynamic frames only
};

struct MetricsReport {
    std::vector<FrameMetrics> frames;
    std::optional<double> static_psnr, static_ssim;
    std::optional<double> dynamic_psnr, dynamic_ssim;

    /// Mean object-region PSNR over the dynamic frames that have one.
    std::optional<double> object_psnr() const;
    /// Mean PSNR over every evaluated frame.
    std::optional<double> overall_psnr() const;
    /// Flat `key=value` lines: four aggregates, the two frame lists, then
    /// one line per frame and metric.
    std::string to_text() const;
};

/// Renders every held-out frame of `dataset` and scores it against the image
/// outside the body mask grown by `dilation`. A frame is dynamic when it lies
/// in a dynamic clip.
MetricsReport evaluate(const SceneModel &model, const Dataset &dataset, int dilation);

/// Joint masked photometric training of background and object over `views`,
/// the object placed by the model's track, poses fixed.
void finetune_full(SceneModel &model, std::span<const TrainView> views, const PipelineConfig &cfg,
                   std::mt19937_64 &rng, const ProgressFn &progress = {});

struct PipelineResult {
    SceneModel model;
    MetricsReport metrics;
    /// One line per stage: name, config hash, seed, summary.
    std::vector<std::string> provenance;
};

/// Static reconstruction of the first clip, object identification, tracking
/// of every dynamic clip, background update, optional fine-tuning and
/// evaluation. Failures are rethrown as StageError.
PipelineResult run_pipeline(const Dataset &dataset, const PipelineConfig &cfg, const ProgressFn &progress = {});

} // namespace egogs
