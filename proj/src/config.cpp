// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/config.hpp"

#include "egogs/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace egogs {

using nlohmann::json;

DensifyThresholds DensifySchedule::thresholds(double extent) const {
    DensifyThresholds t;
    t.grad = grad_threshold;
    t.min_opacity = min_opacity;
    t.dense_size = dense_fraction * extent;
    t.max_world_size = max_size_fraction * extent;
    t.max_gaussians = max_gaussians;
    return t;
}

namespace {

// Overrides `value` from j[key] when present and marks the key as used.
template <typename T> void field(const json &j, const char *key, T &value, std::vector<std::string> &used) {
    used.emplace_back(key);
    if (j.contains(key)) value = j.at(key).get<T>();
}

void reject_unknown(const json &j, const std::vector<std::string> &used, const std::string &where) {
    for (const auto &[k, v] : j.items())
        if (std::find(used.begin(), used.end(), k) == used.end())
            throw Error(ErrorKind::Parse, "unknown config key '" + where + k + "'");
}

json rates_json(const FieldRates &r) {
    return {{"position", r.position}, {"log_scale", r.log_scale}, {"rotation", r.rotation},
            {"opacity", r.opacity},   {"color", r.color},         {"label", r.label}};
}

void read_rates(const json &j, FieldRates &r, const std::string &where) {
    std::vector<std::string> used;
    field(j, "position", r.position, used);
    field(j, "log_scale", r.log_scale, used);
    field(j, "rotation", r.rotation, used);
    field(j, "opacity", r.opacity, used);
    field(j, "color", r.color, used);
    field(j, "label", r.label, used);
    reject_unknown(j, used, where);
}

json densify_json(const DensifySchedule &d) {
    return {{"enabled", d.enabled},
            {"interval", d.interval},
            {"start", d.start},
            {"stop", d.stop},
            {"grad_threshold", d.grad_threshold},
            {"min_opacity", d.min_opacity},
            {"dense_fraction", d.dense_fraction},
            {"max_size_fraction", d.max_size_fraction},
            {"max_gaussians", d.max_gaussians}};
}

void read_densify(const json &j, DensifySchedule &d, const std::string &where) {
    std::vector<std::string> used;
    field(j, "enabled", d.enabled, used);
    field(j, "interval", d.interval, used);
    field(j, "start", d.start, used);
    field(j, "stop", d.stop, used);
    field(j, "grad_threshold", d.grad_threshold, used);
    field(j, "min_opacity", d.min_opacity, used);
    field(j, "dense_fraction", d.dense_fraction, used);
    field(j, "max_size_fraction", d.max_size_fraction, used);
    field(j, "max_gaussians", d.max_gaussians, used);
    reject_unknown(j, used, where);
}

json to_json(const PipelineConfig &c) {
    const auto &s = c.static_stage;
    const auto &d = c.dynamic_stage;
    return {{"static_stage",
             {{"main_iters", s.main_iters},
              {"entropy_iters", s.entropy_iters},
              {"entropy_weight", s.entropy_weight},
              {"lambda_dssim", s.lambda_dssim},
              {"rates", rates_json(s.rates)},
              {"position_lr_final", s.position_lr_final},
              {"densify", densify_json(s.densify)},
              {"transparent_threshold", s.transparent_threshold},
              {"init_opacity", s.init_opacity},
              {"body_dilation", s.body_dilation},
              {"label_iters", s.label_iters},
              {"label_lr", s.label_lr},
              {"label_init", s.label_init},
              {"label_threshold", s.label_threshold},
              {"mask_frames", s.mask_frames},
              {"label_min_visibility", s.label_min_visibility},
              {"label_propagate", s.label_propagate}}},
            {"dynamic_stage",
             {{"step_k", d.step_k},
              {"frame_schedule", d.frame_schedule},
              {"final_schedule", d.final_schedule},
              {"replay_probability", d.replay_probability},
              {"lr_divisor", d.lr_divisor},
              {"lambda_silhouette", d.lambda_silhouette},
              {"translation_lr", d.translation_lr},
              {"rotation_lr", d.rotation_lr},
              {"rates", rates_json(d.rates)},
              {"densify", densify_json(d.densify)},
              {"max_object_growth", d.max_object_growth}}},
            {"background_iters", c.background_iters},
            {"finetune_iters", c.finetune_iters},
            {"finetune", c.finetune},
            {"finetune_lambda_dssim", c.finetune_lambda_dssim},
            {"finetune_rates", rates_json(c.finetune_rates)},
            {"background_densify", densify_json(c.background_densify)},
            {"eval_dilation", c.eval_dilation},
            {"seed", c.seed}};
}

void validate(const PipelineConfig &c) {
    const auto &s = c.static_stage;
    const auto &d = c.dynamic_stage;
    auto require = [](bool ok, const char *what) {
        if (!ok) throw Error(ErrorKind::InvalidInput, std::string("config: ") + what);
    };
    require(s.main_iters >= 0 && s.entropy_iters >= 0 && s.label_iters >= 0, "iteration counts must be non-negative");
    require(s.mask_frames >= 1, "mask_frames must be at least 1");
    require(d.step_k >= 1, "step_k must be at least 1");
    for (int v : d.frame_schedule) require(v >= 0, "frame_schedule entries must be non-negative");
    for (int v : d.final_schedule) require(v >= 0, "final_schedule entries must be non-negative");
    require(d.replay_probability >= 0.0 && d.replay_probability <= 1.0, "replay_probability must be in [0, 1]");
    require(d.lr_divisor > 0.0, "lr_divisor must be positive");
    require(d.max_object_growth >= 1.0, "max_object_growth must be at least 1");
    require(c.background_iters >= 0 && c.finetune_iters >= 0, "iteration counts must be non-negative");
}

} // namespace

PipelineConfig config_from_json(const std::string &text) {
    PipelineConfig c;
    try {
        const json j = json::parse(text);
        std::vector<std::string> used;
        if (j.contains("static_stage")) {
            const json &js = j.at("static_stage");
            auto &s = c.static_stage;
            std::vector<std::string> u;
            field(js, "main_iters", s.main_iters, u);
            field(js, "entropy_iters", s.entropy_iters, u);
            field(js, "entropy_weight", s.entropy_weight, u);
            field(js, "lambda_dssim", s.lambda_dssim, u);
            u.emplace_back("rates");
            if (js.contains("rates")) read_rates(js.at("rates"), s.rates, "static_stage.rates.");
            field(js, "position_lr_final", s.position_lr_final, u);
            u.emplace_back("densify");
            if (js.contains("densify")) read_densify(js.at("densify"), s.densify, "static_stage.densify.");
            field(js, "transparent_threshold", s.transparent_threshold, u);
            field(js, "init_opacity", s.init_opacity, u);
            field(js, "body_dilation", s.body_dilation, u);
            field(js, "label_iters", s.label_iters, u);
            field(js, "label_lr", s.label_lr, u);
            field(js, "label_init", s.label_init, u);
            field(js, "label_threshold", s.label_threshold, u);
            field(js, "mask_frames", s.mask_frames, u);
            field(js, "label_min_visibility", s.label_min_visibility, u);
            field(js, "label_propagate", s.label_propagate, u);
            reject_unknown(js, u, "static_stage.");
        }
        used.emplace_back("static_stage");
        if (j.contains("dynamic_stage")) {
            const json &jd = j.at("dynamic_stage");
            auto &d = c.dynamic_stage;
            std::vector<std::string> u;
            field(jd, "step_k", d.step_k, u);
            field(jd, "frame_schedule", d.frame_schedule, u);
            field(jd, "final_schedule", d.final_schedule, u);
            field(jd, "replay_probability", d.replay_probability, u);
            field(jd, "lr_divisor", d.lr_divisor, u);
            field(jd, "lambda_silhouette", d.lambda_silhouette, u);
            field(jd, "translation_lr", d.translation_lr, u);
            field(jd, "rotation_lr", d.rotation_lr, u);
            u.emplace_back("rates");
            if (jd.contains("rates")) read_rates(jd.at("rates"), d.rates, "dynamic_stage.rates.");
            u.emplace_back("densify");
            if (jd.contains("densify")) read_densify(jd.at("densify"), d.densify, "dynamic_stage.densify.");
            field(jd, "max_object_growth", d.max_object_growth, u);
            reject_unknown(jd, u, "dynamic_stage.");
        }
        used.emplace_back("dynamic_stage");
        field(j, "background_iters", c.background_iters, used);
        field(j, "finetune_iters", c.finetune_iters, used);
        field(j, "finetune", c.finetune, used);
        field(j, "finetune_lambda_dssim", c.finetune_lambda_dssim, used);
        used.emplace_back("finetune_rates");
        if (j.contains("finetune_rates")) read_rates(j.at("finetune_rates"), c.finetune_rates, "finetune_rates.");
        used.emplace_back("background_densify");
        if (j.contains("background_densify"))
            read_densify(j.at("background_densify"), c.background_densify, "background_densify.");
        field(j, "eval_dilation", c.eval_dilation, used);
        field(j, "seed", c.seed, used);
        reject_unknown(j, used, "");
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

PipelineConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Load, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string config_to_json(const PipelineConfig &config) { return to_json(config).dump(2) + "\n"; }

std::string config_hash(const PipelineConfig &config) {
    const std::string text = to_json(config).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace egogs
