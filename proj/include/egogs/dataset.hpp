// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egogs/camera.hpp"
#include "egogs/clips.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace egogs {

/// Sparse points used to seed the static reconstruction.
struct PointSet {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;
    bool operator==(const PointSet &) const = default;
};

/// One frame entry of a manifest. Paths are relative to the manifest directory.
struct FrameRecord {
    int frame_index = 0;
    std::string image;
    std::string body_mask;
    std::optional<std::string> object_mask;
    int width = 0;
    int height = 0;
    Intrinsics intrinsics;
    Mat3 rotation = Mat3::Identity(); // world to camera
    Vec3 translation = Vec3::Zero();
    bool train = true;
    bool operator==(const FrameRecord &) const = default;
};

struct DatasetManifest {
    std::vector<FrameRecord> frames;
    std::vector<Interaction> interactions;
    PointSet init_points;
    std::string units = "camera trajectory bounding box has unit diagonal";
    bool operator==(const DatasetManifest &) const = default;
};

/// Decoded dataset: frames in index order with clip ids assigned from the partition.
struct Dataset {
    std::vector<CameraFrame> frames;
    std::vector<Interaction> interactions;
    ClipPartition partition;
    PointSet init_points;
    std::string units;
};

/// Throws Error(Parse) on malformed JSON or missing fields.
DatasetManifest read_manifest(const std::filesystem::path &path);
void write_manifest(const DatasetManifest &manifest, const std::filesystem::path &path);

/// Loads and validates a dataset. Images are decoded to [0, 1] and masks
/// binarized at 0.5. Throws Error(Load) naming the frame on missing files,
/// shape mismatches or invalid extrinsics, and Error(InvalidAnnotation) on bad
/// interaction intervals.
Dataset load_dataset(const std::filesystem::path &manifest_path);

/// Writes images, masks and manifest.json under `dir`; returns the manifest path.
std::filesystem::path save_dataset(const Dataset &dataset, const std::filesystem::path &dir);

/// Builds the in-memory dataset from frames and annotations, checking the
/// same invariants as load_dataset.
Dataset make_dataset(std::vector<CameraFrame> frames, std::vector<Interaction> interactions, PointSet init_points);

} // namespace egogs
