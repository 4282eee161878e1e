// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/density.hpp"
#include "egogs/optimizer.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

namespace egogs {

/// When and how adaptive density control runs. Size thresholds are fractions
/// of the scene extent and are resolved at training time.
struct DensifySchedule {
    bool enabled = true;
    int interval = 100;
    int start = 500;
    int stop = 15000;
    double grad_threshold = 2e-4;
    double min_opacity = 5e-3;
    double dense_fraction = 0.01; // clone at or below this fraction of the extent, split above
    double max_size_fraction = 0.0; // prune when larger than this fraction; 0 disables
    std::size_t max_gaussians = 0;  // 0 = unbounded

    DensifyThresholds thresholds(double extent) const;
};

struct StaticTrainConfig {
    int main_iters = 30000;
    int entropy_iters = 10000;
    double entropy_weight = 0.1;
    double lambda_dssim = 0.2;
    FieldRates rates;
    double position_lr_final = 1.6e-6;
    DensifySchedule densify;
    double transparent_threshold = 0.5;
    double init_opacity = 0.1;
    int body_dilation = 2;

    int label_iters = 2000;
    double label_lr = 2.5e-2;
    double label_init = -1e-4;
    double label_threshold = 0.5;
    int mask_frames = 5;
    /// Gaussians whose visibility fraction over the mask frames stays below
    /// this are unobserved: they take the label of the nearby observed
    /// Gaussian closest in their own covariance metric when `label_propagate`
    /// is set and stay background otherwise.
    double label_min_visibility = 0.1;
    bool label_propagate = true;
};

struct DynamicTrainConfig {
    int step_k = 2;
    std::array<int, 3> frame_schedule{4000, 4000, 4000};
    std::array<int, 3> final_schedule{6000, 6000, 6000};
    double replay_probability = 0.5;
    double lr_divisor = 10.0;
    double lambda_silhouette = 0.5;
    double translation_lr = 1e-3;
    double rotation_lr = 1e-3;
    FieldRates rates;
    DensifySchedule densify{true, 100, 0, 1 << 30, 2e-4, 5e-3, 0.01, 0.0, 0};
    /// Densification stops growing the object beyond this multiple of its initial size.
    double max_object_growth = 2.0;
};

struct PipelineConfig {
    StaticTrainConfig static_stage;
    DynamicTrainConfig dynamic_stage;
    int background_iters = 10000;
    int finetune_iters = 10000;
    bool finetune = true;
    double finetune_lambda_dssim = 0.2;
    FieldRates finetune_rates{1.6e-5, 5e-3, 1e-3, 5e-2, 2.5e-3, 0.0};
    DensifySchedule background_densify{true, 100, 0, 1 << 30, 2e-4, 5e-3, 0.01, 0.0, 0};
    int eval_dilation = 2;
    std::uint64_t seed = 0;
};

/// Reads a JSON config; keys absent from the file keep their defaults and
/// unknown keys raise Error(Parse).
PipelineConfig load_config(const std::filesystem::path &path);
PipelineConfig config_from_json(const std::string &text);
std::string config_to_json(const PipelineConfig &config);
/// Stable 64-bit FNV-1a hash of the canonical JSON form, as 16 hex digits.
std::string config_hash(const PipelineConfig &config);

} // namespace egogs
