// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/dataset.hpp"

#include "egogs/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace egogs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json &j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::Parse, "expected a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json frame_json(const FrameRecord &f) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(f.rotation(r, c));
    return {{"frame_index", f.frame_index},
            {"image", f.image},
            {"body_mask", f.body_mask},
            {"object_mask", f.object_mask ? json(*f.object_mask) : json(nullptr)},
            {"width", f.width},
            {"height", f.height},
            {"intrinsics", {{"fx", f.intrinsics.fx}, {"fy", f.intrinsics.fy}, {"cx", f.intrinsics.cx}, {"cy", f.intrinsics.cy}}},
            {"rotation", rot},
            {"translation", vec_json(f.translation)},
            {"train", f.train}};
}

FrameRecord json_frame(const json &j) {
    FrameRecord f;
    f.frame_index = j.at("frame_index").get<int>();
    f.image = j.at("image").get<std::string>();
    f.body_mask = j.at("body_mask").get<std::string>();
    if (j.contains("object_mask") && !j.at("object_mask").is_null()) f.object_mask = j.at("object_mask").get<std::string>();
    f.width = j.at("width").get<int>();
    f.height = j.at("height").get<int>();
    const json &in = j.at("intrinsics");
    f.intrinsics = {in.at("fx").get<double>(), in.at("fy").get<double>(), in.at("cx").get<double>(), in.at("cy").get<double>()};
    const json &rot = j.at("rotation");
    if (!rot.is_array() || rot.size() != 9) throw Error(ErrorKind::Parse, "rotation must have 9 entries");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) f.rotation(r, c) = rot[r * 3 + c].get<double>();
    f.translation = json_vec(j.at("translation"));
    f.train = j.at("train").get<bool>();
    return f;
}

std::string frame_name(const char *prefix, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%06d.png", prefix, index);
    return buf;
}

void check_extrinsics(const Mat3 &r, const Vec3 &t, int frame) {
    try {
        check_rotation(r, 1e-6, "extrinsic rotation");
    } catch (const Error &e) {
        throw Error(ErrorKind::Load, "frame " + std::to_string(frame) + ": " + e.what());
    }
    if (!t.allFinite()) throw Error(ErrorKind::Load, "frame " + std::to_string(frame) + ": non-finite translation");
}

} // namespace

DatasetManifest read_manifest(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Load, "cannot open manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
        DatasetManifest m;
        for (const auto &f : j.at("frames")) m.frames.push_back(json_frame(f));
        for (const auto &it : j.at("interactions")) {
            if (!it.is_array() || it.size() != 2) throw Error(ErrorKind::Parse, "interaction must be [onset, offset]");
            m.interactions.push_back({it[0].get<int>(), it[1].get<int>()});
        }
        if (j.contains("init_points")) {
            const json &p = j.at("init_points");
            for (const auto &x : p.at("positions")) m.init_points.positions.push_back(json_vec(x));
            for (const auto &x : p.at("colors")) m.init_points.colors.push_back(json_vec(x));
        }
        if (j.contains("units")) m.units = j.at("units").get<std::string>();
        return m;
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Parse, "manifest " + path.string() + ": " + e.what());
    }
}

void write_manifest(const DatasetManifest &m, const fs::path &path) {
    json frames = json::array();
    for (const auto &f : m.frames) frames.push_back(frame_json(f));
    json inter = json::array();
    for (const auto &it : m.interactions) inter.push_back({it.onset, it.offset});
    json pos = json::array(), col = json::array();
    for (const auto &p : m.init_points.positions) pos.push_back(vec_json(p));
    for (const auto &c : m.init_points.colors) col.push_back(vec_json(c));
    const json j = {{"format", "egogs-dataset"},
                    {"version", 1},
                    {"units", m.units},
                    {"interactions", inter},
                    {"init_points", {{"positions", pos}, {"colors", col}}},
                    {"frames", frames}};
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Load, "cannot write manifest " + path.string());
    out << j.dump(1) << '\n';
}

Dataset make_dataset(std::vector<CameraFrame> frames, std::vector<Interaction> interactions, PointSet init_points) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const CameraFrame &f = frames[i];
        const std::string tag = "frame " + std::to_string(f.frame_index);
        if (f.frame_index != static_cast<int>(i))
            throw Error(ErrorKind::Load, tag + ": frame indices must be dense and sorted from 0");
        if (f.image.channels != 3 || f.image.width != f.camera.width || f.image.height != f.camera.height)
            throw Error(ErrorKind::Load, tag + ": image shape does not match the camera");
        if (f.body_mask.width != f.image.width || f.body_mask.height != f.image.height)
            throw Error(ErrorKind::Load, tag + ": body mask shape mismatch");
        if (f.object_mask && (f.object_mask->width != f.image.width || f.object_mask->height != f.image.height))
            throw Error(ErrorKind::Load, tag + ": object mask shape mismatch");
        check_extrinsics(f.camera.rotation, f.camera.translation, f.frame_index);
    }
    if (init_points.colors.size() != init_points.positions.size())
        throw Error(ErrorKind::Load, "init points and colors differ in count");
    Dataset d;
    d.partition = partition_clips(static_cast<int>(frames.size()), interactions);
    if (!interactions.empty() && interactions.front().onset == 0)
        throw Error(ErrorKind::InvalidAnnotation, "the first interaction must be preceded by a static clip");
    for (auto &f : frames) f.clip_id = d.partition.clip_of(f.frame_index).clip_id;
    d.frames = std::move(frames);
    d.interactions = std::move(interactions);
    d.init_points = std::move(init_points);
    return d;
}

Dataset load_dataset(const fs::path &manifest_path) {
    const DatasetManifest m = read_manifest(manifest_path);
    const fs::path root = manifest_path.parent_path();
    std::vector<CameraFrame> frames;
    frames.reserve(m.frames.size());
    for (const auto &r : m.frames) {
        const std::string tag = "frame " + std::to_string(r.frame_index);
        check_extrinsics(r.rotation, r.translation, r.frame_index);
        auto require = [&](const std::string &rel) {
            const fs::path p = root / rel;
            if (!fs::exists(p)) throw Error(ErrorKind::Load, tag + ": missing file " + p.string());
            return p;
        };
        CameraFrame f;
        f.frame_index = r.frame_index;
        f.train = r.train;
        f.camera.width = r.width;
        f.camera.height = r.height;
        f.camera.intrinsics = r.intrinsics;
        f.camera.rotation = r.rotation;
        f.camera.translation = r.translation;
        try {
            f.image = read_png_rgb(require(r.image));
            f.body_mask = read_png_mask(require(r.body_mask));
            if (r.object_mask) f.object_mask = read_png_mask(require(*r.object_mask));
        } catch (const Error &e) {
            if (e.kind() == ErrorKind::Load) throw;
            throw Error(ErrorKind::Load, tag + ": " + e.what());
        }
        frames.push_back(std::move(f));
    }
    Dataset d = make_dataset(std::move(frames), m.interactions, m.init_points);
    d.units = m.units;
    return d;
}

fs::path save_dataset(const Dataset &d, const fs::path &dir) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    DatasetManifest m;
    m.interactions = d.interactions;
    m.init_points = d.init_points;
    if (!d.units.empty()) m.units = d.units;
    for (const auto &f : d.frames) {
        FrameRecord r;
        r.frame_index = f.frame_index;
        r.image = "images/" + frame_name("", f.frame_index);
        r.body_mask = "masks/" + frame_name("body_", f.frame_index);
        write_png_rgb(dir / r.image, f.image);
        write_png_mask(dir / r.body_mask, f.body_mask);
        if (f.object_mask) {
            r.object_mask = "masks/" + frame_name("object_", f.frame_index);
            write_png_mask(dir / *r.object_mask, *f.object_mask);
        }
        r.width = f.camera.width;
        r.height = f.camera.height;
        r.intrinsics = f.camera.intrinsics;
        r.rotation = f.camera.rotation;
        r.translation = f.camera.translation;
        r.train = f.train;
        m.frames.push_back(std::move(r));
    }
    const fs::path manifest = dir / "manifest.json";
    write_manifest(m, manifest);
    return manifest;
}

} // namespace egogs
