// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/gaussian_cloud.hpp"
#include "egogs/pose_track.hpp"
#include "egogs/scene_model.hpp"

#include <filesystem>
#include <string>

namespace egogs {

/// Value type of the per-point properties written to PLY.
enum class PlyPrecision { Float32, Float64 };

/// Binary little-endian PLY with the usual splat vertex properties (x y z,
/// nx ny nz, f_dc_0..2, opacity, scale_0..2, rot_0..3) plus `label` and the
/// exact color as rgb_0..2. f_dc holds the zeroth-order SH coefficient
/// (rgb - 0.5) / C0 for viewers; rgb_* wins on import when present.
void write_ply(const GaussianCloud &cloud, const std::filesystem::path &path,
               PlyPrecision precision = PlyPrecision::Float64);
/// Accepts float or double properties; unknown properties are skipped and a
/// missing `label` reads as 0. Throws Error(Parse) with the byte offset on
/// malformed or truncated input.
GaussianCloud read_ply(const std::filesystem::path &path);

inline constexpr double kShC0 = 0.28209479177387814;

/// Pose track as JSON: pivot, step and ordered knots with frame index, 3x3
/// rotation, translation and the raw 6D parameters. Round-trips bit-exactly.
void write_track(const PoseTrack &track, const std::filesystem::path &path);
PoseTrack read_track(const std::filesystem::path &path);
std::string track_to_json(const PoseTrack &track);
PoseTrack track_from_json(const std::string &text);

/// Writes background.ply, object.ply and scene.json (track + metadata) into `dir`.
void export_model(const SceneModel &model, const std::filesystem::path &dir,
                  PlyPrecision precision = PlyPrecision::Float64);
SceneModel import_model(const std::filesystem::path &dir);

} // namespace egogs
