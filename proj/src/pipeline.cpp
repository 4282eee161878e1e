// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/pipeline.hpp"

#include "egogs/dynamic_stage.hpp"
#include "egogs/geometry.hpp"
#include "egogs/losses.hpp"
#include "egogs/rasterizer.hpp"
#include "egogs/static_stage.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace egogs {

namespace {

std::optional<double> mean_of(const std::vector<FrameMetrics> &frames, std::optional<double> FrameMetrics::*field,
                              int which) {
    double sum = 0.0;
    int n = 0;
    for (const auto &f : frames) {
        if (which >= 0 && f.dynamic != (which == 1)) continue;
        if (!(f.*field)) continue;
        sum += *(f.*field);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

std::string fmt(const std::optional<double> &v) {
    if (!v) return "none";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

// Object silhouette at `frame`: the annotated mask, else the posed object's alpha > 0.5.
Mask object_silhouette(const SceneModel &model, const CameraFrame &frame) {
    if (frame.object_mask) return *frame.object_mask;
    Mask m(frame.camera.width, frame.camera.height);
    if (model.object.empty()) return m;
    const GaussianCloud posed = apply_rigid(model.object, pose_at_frame(model.track, frame.frame_index));
    const RenderOutput out = render_cloud(posed, frame.camera, RenderMode::Alpha);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) m.at(x, y) = out.alpha.at(x, y) > 0.5 ? 1 : 0;
    return m;
}

CloudGradients slice(const CloudGradients &g, std::size_t begin, std::size_t end) {
    CloudGradients out(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t j = i - begin;
        out.positions[j] = g.positions[i];
        out.log_scales[j] = g.log_scales[i];
        out.rotations[j] = g.rotations[i];
        out.opacity_logits[j] = g.opacity_logits[i];
        out.colors[j] = g.colors[i];
        out.labels[j] = g.labels[i];
        out.rotation_matrices[j] = g.rotation_matrices[i];
        out.mean2d_ndc_norm[j] = g.mean2d_ndc_norm[i];
        out.visible[j] = g.visible[i];
    }
    return out;
}

class Stages {
  public:
    Stages(const PipelineConfig &cfg, const ProgressFn &progress)
        : cfg_(cfg), hash_(config_hash(cfg)), progress_(progress) {}

    template <typename F> auto run(const std::string &name, F &&body) {
        if (progress_) progress_("[" + name + "] start");
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto summary = body();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", secs);
            lines.push_back("stage=" + name + " config_hash=" + hash_ + " seed=" + std::to_string(cfg_.seed) +
                            " seconds=" + buf + (summary.empty() ? "" : " " + summary));
            if (progress_) progress_(lines.back());
        } catch (const StageError &) {
            throw;
        } catch (const Error &e) {
            throw StageError(name, e);
        }
    }

    ProgressFn tagged(const std::string &name) const {
        if (!progress_) return {};
        return [p = progress_, name](const std::string &msg) { p("[" + name + "] " + msg); };
    }

    std::vector<std::string> lines;

  private:
    const PipelineConfig &cfg_;
    std::string hash_;
    ProgressFn progress_;
};

} // namespace

std::optional<double> MetricsReport::object_psnr() const { return mean_of(frames, &FrameMetrics::object_psnr, 1); }

std::optional<double> MetricsReport::overall_psnr() const { return mean_of(frames, &FrameMetrics::psnr, -1); }

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << "static.psnr=" << fmt(static_psnr) << "\n";
    os << "static.ssim=" << fmt(static_ssim) << "\n";
    os << "dynamic.psnr=" << fmt(dynamic_psnr) << "\n";
    os << "dynamic.ssim=" << fmt(dynamic_ssim) << "\n";
    for (int which = 0; which < 2; ++which) {
        os << (which ? "dynamic.frames=" : "static.frames=");
        bool first = true;
        for (const auto &f : frames)
            if (f.dynamic == (which == 1)) {
                os << (first ? "" : ",") << f.frame_index;
                first = false;
            }
        os << "\n";
    }
    for (const auto &f : frames) {
        const std::string key = "frame." + std::to_string(f.frame_index);
        os << key << ".psnr=" << fmt(f.psnr) << "\n";
        os << key << ".ssim=" << fmt(f.ssim) << "\n";
        if (f.dynamic) os << key << ".object_psnr=" << fmt(f.object_psnr) << "\n";
    }
    return os.str();
}

MetricsReport evaluate(const SceneModel &model, const Dataset &dataset, int dilation) {
    MetricsReport report;
    for (const CameraFrame &frame : dataset.frames) {
        if (frame.train) continue;
        FrameMetrics m;
        m.frame_index = frame.frame_index;
        m.dynamic = dataset.partition.clip_of(frame.frame_index).kind == ClipKind::Dynamic;
        const Mask keep = body_keep(frame, dilation);
        const RenderOutput out = render_scene(model, frame.camera, frame.frame_index, RenderMode::Color);
        m.psnr = psnr(out.color, frame.image, keep);
        m.ssim = ssim(out.color, frame.image, keep);
        if (m.dynamic && frame.object_mask)
            m.object_psnr = psnr(out.color, frame.image, mask_and(keep, *frame.object_mask));
        report.frames.push_back(m);
    }
    report.static_psnr = mean_of(report.frames, &FrameMetrics::psnr, 0);
    report.static_ssim = mean_of(report.frames, &FrameMetrics::ssim, 0);
    report.dynamic_psnr = mean_of(report.frames, &FrameMetrics::psnr, 1);
    report.dynamic_ssim = mean_of(report.frames, &FrameMetrics::ssim, 1);
    return report;
}

void finetune_full(SceneModel &model, std::span<const TrainView> views, const PipelineConfig &cfg,
                   std::mt19937_64 &rng, const ProgressFn &progress) {
    if (cfg.finetune_iters <= 0) return;
    if (views.empty()) throw Error(ErrorKind::InvalidInput, "finetune_full: no training views");
    FieldRates rates = cfg.finetune_rates;
    rates.label = 0.0;
    OptimizerState bg_state(model.background.size(), rates);
    OptimizerState obj_state(model.object.size(), rates);
    FrameSampler sampler(views.size(), rng);
    double running = 0.0;
    for (int it = 0; it < cfg.finetune_iters; ++it) {
        const TrainView &view = views[sampler.next()];
        const RigidPose pose = pose_at_frame(model.track, view.frame->frame_index);
        GaussianCloud joint = model.background;
        const GaussianCloud posed = apply_rigid(model.object, pose);
        joint.append(posed);
        const RenderOutput out = render_cloud(joint, view.frame->camera, RenderMode::Color);
        const ImageLoss loss = masked_photometric(out.color, view.frame->image, view.keep, cfg.finetune_lambda_dssim);
        RenderGrads rg;
        rg.color = loss.grad;
        const CloudGradients g = render_backward(joint, view.frame->camera, out, rg);
        const std::size_t nb = model.background.size();
        if (nb > 0) adam_step(model.background, slice(g, 0, nb), bg_state);
        if (!model.object.empty()) {
            PoseGradient unused;
            const CloudGradients go =
                rigid_backward(model.object, pose_rotation(pose), Vec3::Zero(), slice(g, nb, joint.size()), unused);
            adam_step(model.object, go, obj_state);
        }
        running = it == 0 ? loss.value : 0.98 * running + 0.02 * loss.value;
        if (progress && (it + 1) % 500 == 0)
            progress("step=" + std::to_string(it + 1) + " loss=" + std::to_string(running));
    }
}

PipelineResult run_pipeline(const Dataset &dataset, const PipelineConfig &cfg, const ProgressFn &progress) {
    Stages stages(cfg, progress);
    std::mt19937_64 rng(cfg.seed);
    const auto &partition = dataset.partition;
    const int body_dilation = cfg.static_stage.body_dilation;
    PipelineResult result;
    SceneModel &model = result.model;

    std::vector<TrainView> all_views;
    for (const CameraFrame &f : dataset.frames)
        if (f.train) all_views.push_back({&f, body_keep(f, body_dilation)});
    auto views_in = [&](const Clip &clip) {
        std::vector<TrainView> out;
        for (const auto &v : all_views)
            if (clip.contains(v.frame->frame_index)) out.push_back(v);
        return out;
    };
    auto view_of = [&](int frame) -> const TrainView & {
        for (const auto &v : all_views)
            if (v.frame->frame_index == frame) return v;
        throw Error(ErrorKind::InvalidInput, "frame " + std::to_string(frame) + " is not a training frame");
    };

    GaussianCloud static_cloud;
    stages.run("train_static", [&] {
        if (partition.clips.empty() || partition.clips.front().kind != ClipKind::Static)
            throw Error(ErrorKind::InvalidAnnotation, "the first clip must be static");
        const auto views = views_in(partition.clips.front());
        static_cloud = train_static(views, dataset.init_points, cfg.static_stage, rng, stages.tagged("train_static"));
        return "views=" + std::to_string(views.size()) + " gaussians=" + std::to_string(static_cloud.size());
    });

    const auto dynamic = partition.dynamic_clip_indices();
    if (dynamic.empty()) {
        model.background = std::move(static_cloud);
        model.metadata["config_hash"] = config_hash(cfg);
        model.metadata["seed"] = std::to_string(cfg.seed);
        stages.run("evaluate", [&] {
            result.metrics = evaluate(model, dataset, cfg.eval_dilation);
            return std::string("frames=") + std::to_string(result.metrics.frames.size());
        });
        result.provenance = stages.lines;
        return result;
    }

    stages.run("identify_object", [&] {
        const Clip &first_dynamic = partition.clips[dynamic.front()];
        std::vector<TrainView> mask_views;
        for (auto it = all_views.rbegin(); it != all_views.rend(); ++it) {
            const CameraFrame &f = *it->frame;
            if (f.frame_index >= first_dynamic.first || !f.object_mask) continue;
            mask_views.insert(mask_views.begin(), *it);
            if (static_cast<int>(mask_views.size()) >= cfg.static_stage.mask_frames) break;
        }
        if (mask_views.empty())
            throw Error(ErrorKind::InvalidInput, "no training frame with an object mask precedes the first interaction");
        ObjectSplit split = identify_object(std::move(static_cloud), mask_views, cfg.static_stage, rng);
        model.background = std::move(split.background);
        model.object = std::move(split.object);
        return "mask_frames=" + std::to_string(mask_views.size()) + " object=" + std::to_string(model.object.size()) +
               " background=" + std::to_string(model.background.size());
    });

    const double extent = camera_extent(all_views);
    ObjectState object;
    stages.run("track_poses", [&] {
        object = make_object_state(model.object, cfg.dynamic_stage, extent);
        int total = 0;
        for (std::size_t ci : dynamic) {
            const Clip &clip = partition.clips[ci];
            int anchor = -1;
            for (const auto &v : all_views)
                if (v.frame->frame_index < clip.first && v.frame->object_mask) anchor = v.frame->frame_index;
            if (!model.track.empty() && model.track.last_frame() > anchor) anchor = model.track.last_frame();
            if (anchor < 0)
                throw Error(ErrorKind::InvalidInput,
                            "no anchor frame with an object mask before clip " + std::to_string(clip.clip_id));
            const RigidPose anchor_pose =
                model.track.empty() ? RigidPose::identity(anchor) : pose_at_frame(model.track, anchor);
            const auto knots = select_knot_frames(dataset, clip, anchor, cfg.dynamic_stage.step_k);
            std::vector<TrainView> knot_views;
            for (int f : knots) knot_views.push_back(view_of(f));
            track_clip(object, model.track, {view_of(anchor), anchor_pose}, knot_views, cfg.dynamic_stage, rng,
                       stages.tagged("track_poses"));
            total += static_cast<int>(knots.size());
        }
        model.object = object.cloud;
        model.track.step = cfg.dynamic_stage.step_k;
        return "clips=" + std::to_string(dynamic.size()) + " knots=" + std::to_string(total) +
               " object=" + std::to_string(model.object.size());
    });

    stages.run("update_background", [&] {
        std::vector<TrainView> views;
        for (const auto &v : all_views)
            views.push_back({v.frame, background_keep(*v.frame, object_silhouette(model, *v.frame), body_dilation,
                                                      body_dilation)});
        update_background(model.background, views, cfg, rng, stages.tagged("update_background"));
        return "gaussians=" + std::to_string(model.background.size());
    });

    if (cfg.finetune) {
        stages.run("finetune", [&] {
            finetune_full(model, all_views, cfg, rng, stages.tagged("finetune"));
            return "iters=" + std::to_string(cfg.finetune_iters);
        });
    }

    model.metadata["config_hash"] = config_hash(cfg);
    model.metadata["seed"] = std::to_string(cfg.seed);
    model.metadata["step_k"] = std::to_string(cfg.dynamic_stage.step_k);
    model.metadata["finetune"] = cfg.finetune ? "true" : "false";

    stages.run("evaluate", [&] {
        result.metrics = evaluate(model, dataset, cfg.eval_dilation);
        return "static_psnr=" + fmt(result.metrics.static_psnr) + " dynamic_psnr=" + fmt(result.metrics.dynamic_psnr);
    });
    result.provenance = stages.lines;
    return result;
}

} // namespace egogs
