// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/gaussian_cloud.hpp"
#include "egogs/rasterizer.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace egogs {

enum class Field : int { Position = 0, LogScale, Rotation, Opacity, Color, Label };
inline constexpr int kNumFields = 6;
inline constexpr std::array<int, kNumFields> kFieldWidth{3, 3, 4, 1, 3, 1};

/// Per-field learning rates. A zero rate freezes the field (its moments are not touched).
struct FieldRates {
    double position = 1.6e-4;
    double log_scale = 5e-3;
    double rotation = 1e-3;
    double opacity = 5e-2;
    double color = 2.5e-3;
    double label = 2.5e-2;

    double get(Field f) const;
    FieldRates scaled(double factor) const;
    static FieldRates frozen() { return {0, 0, 0, 0, 0, 0}; }
    static FieldRates labels_only(double label_lr) { return {0, 0, 0, 0, 0, label_lr}; }
};

/// Exponential decay from `initial` to `final` over `steps`, constant afterwards.
double exponential_lr(double initial, double final, std::int64_t step, std::int64_t steps);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
};

/// Adam moments and densification statistics for one cloud. Row i of every
/// array belongs to Gaussian i of the cloud it was created for.
struct OptimizerState {
    FieldRates rates;
    AdamParams adam;
    std::array<std::vector<double>, kNumFields> m;
    std::array<std::vector<double>, kNumFields> v;
    std::array<std::int64_t, kNumFields> steps{};
    std::int64_t iteration = 0;
    std::vector<double> grad_accum;
    std::vector<int> grad_count;

    OptimizerState() = default;
    OptimizerState(std::size_t n, const FieldRates &r, const AdamParams &a = {});

    std::size_t size() const { return grad_accum.size(); }
    /// Keep rows where keep[i] is true.
    void retain(const std::vector<bool> &keep);
    /// Append `count` rows with zeroed moments and statistics.
    void append_zero(std::size_t count);
    void reset_stats();
    void accumulate(const CloudGradients &grads);
};

/// One Adam update of every field with a nonzero rate. Quaternions are
/// renormalized and colors clamped to [0, 1] afterwards. Throws
/// Error(Divergence) on a non-finite gradient and Error(ContractViolation) on
/// mismatched sizes.
void adam_step(GaussianCloud &cloud, const CloudGradients &grads, OptimizerState &state);

} // namespace egogs
