// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/dataset.hpp"
#include "egogs/scene_model.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace egogs {

/// Parameters of a procedurally generated room with one box-shaped object
/// that a synthetic arm moves during each interaction.
struct SyntheticSceneSpec {
    int width = 64;
    int height = 64;
    double focal = 64.0; // pixels
    int num_frames = 100;
    std::vector<Interaction> interactions{{40, 69}};

    // Object motion per frame while an interaction is active, in scene units
    // (after normalization) and degrees about the object centroid.
    Vec3 velocity{0.008, 0.004, 0.0};
    Vec3 rotation_axis{0.0, 0.0, 1.0};
    double rotation_deg_per_frame = 2.0;
    double lift = 0.06; // peak extra height reached mid-interaction

    double room_spacing = 0.05;   // background Gaussian grid pitch (before normalization)
    double object_spacing = 0.02; // object surface grid pitch
    Vec3 object_size{0.26, 0.18, 0.16};
    double camera_radius = 0.75;
    double camera_height = 0.55;
    double arc_degrees = 70.0;

    double body_radius = 5.0; // hand disc radius in pixels; 0 disables the arm
    double noise = 0.0;       // per-channel Gaussian pixel noise
    int mask_margin = 10;     // static frames on each side of an interaction that get object masks
    int train_stride = 2;     // every train_stride-th frame is a training frame, the rest are held out
    double init_fraction = 0.5;
    double init_jitter = 0.01;
    std::uint64_t seed = 0;
};

/// Generated frames (unquantized) plus ground truth.
struct SyntheticScene {
    Dataset dataset;
    /// True clouds; `truth.track` holds the object pose at every frame.
    SceneModel truth;
    /// World units per raw generator unit (camera trajectory bbox diagonal becomes 1).
    double scale = 1.0;
};

SyntheticScene generate_synthetic(const SyntheticSceneSpec &spec);

/// Writes the dataset (8-bit PNGs + manifest.json) under `dir` and the ground
/// truth model under `dir`/ground_truth. Returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticScene &scene, const std::filesystem::path &dir);

/// Ground-truth model written by write_synthetic.
SceneModel read_ground_truth(const std::filesystem::path &dataset_dir);

/// Dense per-frame object poses for the given motion parameters.
std::vector<RigidPose> object_trajectory(const SyntheticSceneSpec &spec, const Vec3 &pivot);

} // namespace egogs
