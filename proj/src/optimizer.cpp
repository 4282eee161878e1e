// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/optimizer.hpp"

#include "egogs/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace egogs {

double FieldRates::get(Field f) const {
    switch (f) {
    case Field::Position: return position;
    case Field::LogScale: return log_scale;
    case Field::Rotation: return rotation;
    case Field::Opacity: return opacity;
    case Field::Color: return color;
    case Field::Label: return label;
    }
    return 0.0;
}

FieldRates FieldRates::scaled(double factor) const {
    return {position * factor, log_scale * factor, rotation * factor,
            opacity * factor,  color * factor,     label * factor};
}

double exponential_lr(double initial, double final, std::int64_t step, std::int64_t steps) {
    if (steps <= 0 || initial <= 0.0 || final <= 0.0) return initial;
    const double t = std::clamp(static_cast<double>(step) / static_cast<double>(steps), 0.0, 1.0);
    return std::exp((1.0 - t) * std::log(initial) + t * std::log(final));
}

OptimizerState::OptimizerState(std::size_t n, const FieldRates &r, const AdamParams &a) : rates(r), adam(a) {
    for (int f = 0; f < kNumFields; ++f) {
        m[f].assign(n * kFieldWidth[f], 0.0);
        v[f].assign(n * kFieldWidth[f], 0.0);
    }
    grad_accum.assign(n, 0.0);
    grad_count.assign(n, 0);
}

void OptimizerState::retain(const std::vector<bool> &keep) {
    if (keep.size() != size()) throw Error(ErrorKind::ContractViolation, "OptimizerState::retain: size mismatch");
    std::size_t w = 0;
    for (std::size_t r = 0; r < keep.size(); ++r) {
        if (!keep[r]) continue;
        for (int f = 0; f < kNumFields; ++f) {
            const int k = kFieldWidth[f];
            for (int c = 0; c < k; ++c) {
                m[f][w * k + c] = m[f][r * k + c];
                v[f][w * k + c] = v[f][r * k + c];
            }
        }
        grad_accum[w] = grad_accum[r];
        grad_count[w] = grad_count[r];
        ++w;
    }
    for (int f = 0; f < kNumFields; ++f) {
        m[f].resize(w * kFieldWidth[f]);
        v[f].resize(w * kFieldWidth[f]);
    }
    grad_accum.resize(w);
    grad_count.resize(w);
}

void OptimizerState::append_zero(std::size_t count) {
    const std::size_t n = size() + count;
    for (int f = 0; f < kNumFields; ++f) {
        m[f].resize(n * kFieldWidth[f], 0.0);
        v[f].resize(n * kFieldWidth[f], 0.0);
    }
    grad_accum.resize(n, 0.0);
    grad_count.resize(n, 0);
}

void OptimizerState::reset_stats() {
    std::fill(grad_accum.begin(), grad_accum.end(), 0.0);
    std::fill(grad_count.begin(), grad_count.end(), 0);
}

void OptimizerState::accumulate(const CloudGradients &grads) {
    if (grads.size() != size()) throw Error(ErrorKind::ContractViolation, "OptimizerState::accumulate: size mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
        if (!grads.visible[i]) continue;
        grad_accum[i] += grads.mean2d_ndc_norm[i];
        grad_count[i] += 1;
    }
}

namespace {

const char *field_name(int f) {
    static const char *names[] = {"position", "log_scale", "rotation", "opacity", "color", "label"};
    return names[f];
}

double *param_ptr(GaussianCloud &c, int f, std::size_t i) {
    switch (static_cast<Field>(f)) {
    case Field::Position: return c.positions[i].data();
    case Field::LogScale: return c.log_scales[i].data();
    case Field::Rotation: return c.rotations[i].data();
    case Field::Opacity: return &c.opacity_logits[i];
    case Field::Color: return c.colors[i].data();
    case Field::Label: return &c.labels[i];
    }
    return nullptr;
}

const double *grad_ptr(const CloudGradients &g, int f, std::size_t i) {
    switch (static_cast<Field>(f)) {
    case Field::Position: return g.positions[i].data();
    case Field::LogScale: return g.log_scales[i].data();
    case Field::Rotation: return g.rotations[i].data();
    case Field::Opacity: return &g.opacity_logits[i];
    case Field::Color: return g.colors[i].data();
    case Field::Label: return &g.labels[i];
    }
    return nullptr;
}

} // namespace

void adam_step(GaussianCloud &cloud, const CloudGradients &grads, OptimizerState &state) {
    const std::size_t n = cloud.size();
    if (grads.size() != n || state.size() != n || !cloud.consistent())
        throw Error(ErrorKind::ContractViolation, "adam_step: cloud, gradient and optimizer sizes differ (" +
                                                      std::to_string(n) + ", " + std::to_string(grads.size()) +
                                                      ", " + std::to_string(state.size()) + ")");
    for (int f = 0; f < kNumFields; ++f) {
        const double lr = state.rates.get(static_cast<Field>(f));
        if (lr == 0.0) continue;
        const int k = kFieldWidth[f];
        for (std::size_t i = 0; i < n; ++i) {
            const double *g = grad_ptr(grads, f, i);
            for (int c = 0; c < k; ++c)
                if (!std::isfinite(g[c]))
                    throw Error(ErrorKind::Divergence, std::string("non-finite ") + field_name(f) +
                                                           " gradient at Gaussian " + std::to_string(i) +
                                                           ", iteration " + std::to_string(state.iteration));
        }
    }
    for (int f = 0; f < kNumFields; ++f) {
        const double lr = state.rates.get(static_cast<Field>(f));
        if (lr == 0.0) continue;
        const int k = kFieldWidth[f];
        const auto t = ++state.steps[f];
        const double b1 = state.adam.beta1, b2 = state.adam.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        auto &m = state.m[f];
        auto &v = state.v[f];
        for (std::size_t i = 0; i < n; ++i) {
            double *p = param_ptr(cloud, f, i);
            const double *g = grad_ptr(grads, f, i);
            for (int c = 0; c < k; ++c) {
                const std::size_t j = i * k + c;
                m[j] = b1 * m[j] + (1.0 - b1) * g[c];
                v[j] = b2 * v[j] + (1.0 - b2) * g[c] * g[c];
                p[c] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.adam.epsilon);
            }
        }
    }
    ++state.iteration;
    if (state.rates.rotation != 0.0) cloud.renormalize_rotations();
    if (state.rates.color != 0.0)
        for (auto &c : cloud.colors) c = c.cwiseMax(0.0).cwiseMin(1.0);
}

} // namespace egogs
