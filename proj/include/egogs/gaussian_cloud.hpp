// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/types.hpp"

#include <cstddef>
#include <vector>

namespace egogs {

/// Structure-of-arrays container for 3D Gaussians. Color is a single RGB per
/// Gaussian (no view dependence). Every field array has the same length.
struct GaussianCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> log_scales;
    std::vector<Vec4> rotations; // unit quaternions (w, x, y, z)
    std::vector<double> opacity_logits;
    std::vector<Vec3> colors;
    std::vector<double> labels;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    bool consistent() const {
        const std::size_t n = positions.size();
        return log_scales.size() == n && rotations.size() == n && opacity_logits.size() == n &&
               colors.size() == n && labels.size() == n;
    }

    double opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }
    Vec3 scale(std::size_t i) const { return log_scales[i].array().exp(); }

    void reserve(std::size_t n) {
        positions.reserve(n);
        log_scales.reserve(n);
        rotations.reserve(n);
        opacity_logits.reserve(n);
        colors.reserve(n);
        labels.reserve(n);
    }

    void push_back(const Vec3 &position, const Vec3 &log_scale, const Vec4 &rotation,
                   double opacity_logit, const Vec3 &color, double label = 0.0) {
        positions.push_back(position);
        log_scales.push_back(log_scale);
        rotations.push_back(rotation);
        opacity_logits.push_back(opacity_logit);
        colors.push_back(color);
        labels.push_back(label);
    }

    /// Copies Gaussian `i` of `other` onto the end of this cloud.
    void append_from(const GaussianCloud &other, std::size_t i) {
        push_back(other.positions[i], other.log_scales[i], other.rotations[i], other.opacity_logits[i],
                  other.colors[i], other.labels[i]);
    }

    void append(const GaussianCloud &other) {
        for (std::size_t i = 0; i < other.size(); ++i) append_from(other, i);
    }

    /// Keeps the Gaussians whose flag is true, preserving order.
    void retain(const std::vector<bool> &keep);

    void renormalize_rotations() {
        for (auto &q : rotations) q.normalize();
    }

    bool operator==(const GaussianCloud &) const = default;
};

inline void GaussianCloud::retain(const std::vector<bool> &keep) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < size(); ++r) {
        if (!keep[r]) continue;
        positions[w] = positions[r];
        log_scales[w] = log_scales[r];
        rotations[w] = rotations[r];
        opacity_logits[w] = opacity_logits[r];
        colors[w] = colors[r];
        labels[w] = labels[r];
        ++w;
    }
    positions.resize(w);
    log_scales.resize(w);
    rotations.resize(w);
    opacity_logits.resize(w);
    colors.resize(w);
    labels.resize(w);
}

} // namespace egogs
