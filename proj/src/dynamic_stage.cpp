// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/dynamic_stage.hpp"

#include "egogs/density.hpp"
#include "egogs/error.hpp"
#include "egogs/geometry.hpp"
#include "egogs/losses.hpp"
#include "egogs/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace egogs {

namespace {

using Vec9 = Eigen::Matrix<double, 9, 1>;

// Adam over (offset, rot6d) with separate rates for the two blocks.
struct PoseAdam {
    Vec9 m = Vec9::Zero();
    Vec9 v = Vec9::Zero();
    int t = 0;

    void step(Vec3 &offset, Vec6 &rot6d, const PoseGradient &g, double lr_t, double lr_r) {
        Vec9 grad;
        grad << g.offset, g.rot6d;
        if (!grad.allFinite()) throw Error(ErrorKind::Divergence, "pose gradient is not finite");
        const AdamParams a;
        ++t;
        m = a.beta1 * m + (1.0 - a.beta1) * grad;
        v = a.beta2 * v + (1.0 - a.beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(a.beta1, t), c2 = 1.0 - std::pow(a.beta2, t);
        for (int i = 0; i < 9; ++i) {
            const double upd = (m[i] / c1) / (std::sqrt(v[i] / c2) + a.epsilon);
            if (i < 3)
                offset[i] -= lr_t * upd;
            else
                rot6d[i - 3] -= lr_r * upd;
        }
        // Keep the 6D vector on the frame manifold so its scale, and with it
        // the effective step size, does not drift.
        rot6d = rotmat_to_sixd(sixd_to_rotmat(rot6d));
    }
};

// World-origin pose of x' = R (x - c) + c + offset.
RigidPose pivot_pose(const Vec6 &rot6d, const Vec3 &offset, const Vec3 &c, int reference) {
    const Mat3 r = sixd_to_rotmat(rot6d);
    try {
        check_rotation(r, 1e-9, "pose rotation");
    } catch (const Error &e) {
        throw Error(ErrorKind::Divergence, e.what());
    }
    RigidPose p;
    p.rot6d = rot6d;
    p.translation = c + offset - r * c;
    p.reference_frame_index = reference;
    return p;
}

void require_mask(const TrainView &view) {
    const CameraFrame &f = *view.frame;
    if (!f.object_mask)
        throw Error(ErrorKind::ContractViolation,
                    "frame " + std::to_string(f.frame_index) + " has no object mask");
    if (f.object_mask->count() == 0)
        throw Error(ErrorKind::ObjectLost, "object mask of frame " + std::to_string(f.frame_index) + " is empty");
}

struct StepResult {
    CloudGradients posed;
    double loss = 0.0;
};

// Render `posed`, evaluate the object loss and return gradients w.r.t. `posed`.
StepResult object_step(const GaussianCloud &posed, const TrainView &view, double lambda) {
    const Camera &cam = view.frame->camera;
    const RenderOutput out = render_cloud(posed, cam, RenderMode::All);
    const ObjectLoss loss = object_loss(out.color, out.alpha, *view.frame, view.keep, lambda);
    RenderGrads rg;
    rg.color = loss.grad_color;
    rg.alpha = loss.grad_alpha;
    return {render_backward(posed, cam, out, rg), loss.value};
}

// Gaussians-only update of the canonical cloud seen at a fixed pose.
double fixed_pose_step(ObjectState &obj, const TrackedView &tv, double lambda) {
    const GaussianCloud posed = apply_rigid(obj.cloud, tv.pose);
    const StepResult s = object_step(posed, tv.view, lambda);
    PoseGradient unused;
    const CloudGradients g = rigid_backward(obj.cloud, pose_rotation(tv.pose), Vec3::Zero(), s.posed, unused);
    obj.optimizer.accumulate(g);
    adam_step(obj.cloud, g, obj.optimizer);
    return s.loss;
}

void maybe_densify(ObjectState &obj, const DensifySchedule &d, int it, std::mt19937_64 &rng) {
    if (!d.enabled || d.interval <= 0 || it == 0 || it < d.start || it >= d.stop || it % d.interval != 0) return;
    DensifyThresholds th = d.thresholds(obj.extent);
    if (obj.max_gaussians > 0 && (th.max_gaussians == 0 || th.max_gaussians > obj.max_gaussians))
        th.max_gaussians = obj.max_gaussians;
    densify_and_prune(obj.cloud, obj.optimizer, th, rng);
}

FieldRates gaussian_rates(const DynamicTrainConfig &cfg, bool reduced) {
    FieldRates r = reduced ? cfg.rates.scaled(1.0 / cfg.lr_divisor) : cfg.rates;
    r.label = 0.0;
    return r;
}

} // namespace

ObjectState make_object_state(GaussianCloud canonical, const DynamicTrainConfig &cfg, double extent) {
    if (canonical.empty()) throw Error(ErrorKind::EmptyObject, "object cloud is empty");
    ObjectState s;
    s.pivot = centroid(canonical);
    s.optimizer = OptimizerState(canonical.size(), gaussian_rates(cfg, true));
    s.cloud = std::move(canonical);
    s.extent = extent;
    s.max_gaussians = static_cast<std::size_t>(std::ceil(cfg.max_object_growth * s.cloud.size()));
    return s;
}

FramePoseResult estimate_frame_pose(ObjectState &obj, const RigidPose &previous, const RelativeMotion &init,
                                    const TrainView &view, std::span<const TrackedView> history,
                                    const DynamicTrainConfig &cfg, std::mt19937_64 &rng) {
    require_mask(view);
    const int frame = view.frame->frame_index;
    const Vec3 c = transform_point(previous, obj.pivot);
    RelativeMotion motion = init;
    PoseAdam adam;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto replay = [&]() -> const TrackedView * {
        if (history.empty() || coin(rng) >= cfg.replay_probability) return nullptr;
        std::uniform_int_distribution<std::size_t> pick(0, history.size() - 1);
        return &history[pick(rng)];
    };
    const double lambda = cfg.lambda_silhouette;
    double last = 0.0;

    auto pose_phase = [&](int iters) {
        obj.optimizer.rates = gaussian_rates(cfg, true);
        for (int it = 0; it < iters; ++it) {
            if (const TrackedView *tv = replay()) {
                fixed_pose_step(obj, *tv, lambda);
                continue;
            }
            const RigidPose rel = pivot_pose(motion.rot6d, motion.offset, c, previous.reference_frame_index);
            const GaussianCloud mid = apply_rigid(obj.cloud, previous);
            const GaussianCloud posed = apply_rigid(mid, rel);
            const StepResult s = object_step(posed, view, lambda);
            PoseGradient pg, unused;
            const CloudGradients g_mid =
                rigid_backward(mid, sixd_to_rotmat(motion.rot6d), c, s.posed, pg, &motion.rot6d);
            const CloudGradients g = rigid_backward(obj.cloud, pose_rotation(previous), Vec3::Zero(), g_mid, unused);
            obj.optimizer.accumulate(g);
            adam_step(obj.cloud, g, obj.optimizer);
            adam.step(motion.offset, motion.rot6d, pg, cfg.translation_lr, cfg.rotation_lr);
            last = s.loss;
        }
    };

    pose_phase(cfg.frame_schedule[0]);

    obj.optimizer.rates = gaussian_rates(cfg, false);
    obj.optimizer.reset_stats();
    {
        const RigidPose current = compose(pivot_pose(motion.rot6d, motion.offset, c, 0), previous);
        const TrackedView self{view, current};
        for (int it = 0; it < cfg.frame_schedule[1]; ++it) {
            const TrackedView *tv = replay();
            last = fixed_pose_step(obj, tv ? *tv : self, lambda);
            maybe_densify(obj, cfg.densify, it + 1, rng);
        }
    }

    pose_phase(cfg.frame_schedule[2]);

    FramePoseResult r;
    r.motion = motion;
    r.pose = compose(pivot_pose(motion.rot6d, motion.offset, c, 0), previous);
    r.pose.reference_frame_index = previous.reference_frame_index;
    r.final_loss = last;
    (void)frame;
    return r;
}

std::vector<int> select_knot_frames(const Dataset &dataset, const Clip &clip, int anchor, int k) {
    if (k < 1) throw Error(ErrorKind::InvalidInput, "step k must be at least 1");
    auto usable = [&](int f) {
        return f >= 0 && f < static_cast<int>(dataset.frames.size()) && dataset.frames[f].train &&
               dataset.frames[f].object_mask.has_value();
    };
    std::vector<int> knots;
    for (int f = anchor + k; f <= clip.last; f += k) {
        if (!usable(f))
            throw Error(ErrorKind::InvalidInput, "knot frame " + std::to_string(f) +
                                                     " is not a training frame with an object mask (step k=" +
                                                     std::to_string(k) + ")");
        knots.push_back(f);
    }
    const int last = knots.empty() ? anchor : knots.back();
    if (last < clip.last) {
        int tail = -1;
        for (int f = clip.last; f < static_cast<int>(dataset.frames.size()); ++f)
            if (usable(f)) {
                tail = f;
                break;
            }
        if (tail < 0)
            for (int f = clip.last; f > last; --f)
                if (usable(f)) {
                    tail = f;
                    break;
                }
        if (tail > last) knots.push_back(tail);
    }
    return knots;
}

void track_clip(ObjectState &obj, PoseTrack &track, const TrackedView &anchor, std::span<const TrainView> knot_views,
                const DynamicTrainConfig &cfg, std::mt19937_64 &rng, const ProgressFn &progress) {
    require_mask(anchor.view);
    const int anchor_frame = anchor.view.frame->frame_index;
    if (track.empty()) track.pivot = obj.pivot;
    if (track.empty() || track.last_frame() < anchor_frame) track.knots.push_back({anchor_frame, anchor.pose});
    else if (track.last_frame() != anchor_frame)
        throw Error(ErrorKind::ContractViolation, "anchor precedes the end of the existing track");

    std::vector<TrackedView> history{anchor};
    RelativeMotion velocity;
    RigidPose previous = anchor.pose;
    for (const TrainView &view : knot_views) {
        const FramePoseResult r = estimate_frame_pose(obj, previous, velocity, view, history, cfg, rng);
        history.push_back({view, r.pose});
        track.knots.push_back({view.frame->frame_index, r.pose});
        velocity = r.motion;
        previous = r.pose;
        if (progress) {
            const Vec3 c = transform_point(r.pose, obj.pivot);
            progress("frame=" + std::to_string(view.frame->frame_index) + " loss=" + std::to_string(r.final_loss) +
                     " centroid=(" + std::to_string(c.x()) + "," + std::to_string(c.y()) + "," +
                     std::to_string(c.z()) + ") n=" + std::to_string(obj.cloud.size()));
        }
    }
    if (knot_views.empty()) return;

    // Joint round: every knot pose (the anchor stays fixed) and the cloud.
    struct KnotParams {
        Vec3 offset;
        Vec6 rot6d;
        PoseAdam adam;
    };
    std::vector<KnotParams> params;
    for (std::size_t j = 1; j < history.size(); ++j) {
        const RigidPose &p = history[j].pose;
        params.push_back({transform_point(p, obj.pivot) - obj.pivot, p.rot6d, {}});
    }
    std::uniform_int_distribution<std::size_t> pick(0, history.size() - 1);
    const double lambda = cfg.lambda_silhouette;
    const int reference = anchor.pose.reference_frame_index;

    auto joint_pose_phase = [&](int iters) {
        obj.optimizer.rates = gaussian_rates(cfg, true);
        for (int it = 0; it < iters; ++it) {
            const std::size_t j = pick(rng);
            if (j == 0) {
                fixed_pose_step(obj, history[0], lambda);
                continue;
            }
            KnotParams &kp = params[j - 1];
            const RigidPose pose = pivot_pose(kp.rot6d, kp.offset, obj.pivot, reference);
            const GaussianCloud posed = apply_rigid(obj.cloud, pose);
            const StepResult s = object_step(posed, history[j].view, lambda);
            PoseGradient pg;
            const CloudGradients g =
                rigid_backward(obj.cloud, sixd_to_rotmat(kp.rot6d), obj.pivot, s.posed, pg, &kp.rot6d);
            obj.optimizer.accumulate(g);
            adam_step(obj.cloud, g, obj.optimizer);
            kp.adam.step(kp.offset, kp.rot6d, pg, cfg.translation_lr, cfg.rotation_lr);
            history[j].pose = pivot_pose(kp.rot6d, kp.offset, obj.pivot, reference);
        }
    };

    joint_pose_phase(cfg.final_schedule[0]);
    obj.optimizer.rates = gaussian_rates(cfg, false);
    obj.optimizer.reset_stats();
    for (int it = 0; it < cfg.final_schedule[1]; ++it) {
        fixed_pose_step(obj, history[pick(rng)], lambda);
        maybe_densify(obj, cfg.densify, it + 1, rng);
    }
    joint_pose_phase(cfg.final_schedule[2]);

    const std::size_t first = track.knots.size() - knot_views.size();
    for (std::size_t j = 1; j < history.size(); ++j) track.knots[first + j - 1].pose = history[j].pose;
    if (progress) progress("joint round done, n=" + std::to_string(obj.cloud.size()));
}

} // namespace egogs
