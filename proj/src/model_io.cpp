// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/model_io.hpp"

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace egogs {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

// The trailing rgb_* properties keep the exact color: the SH mapping is not
// invertible bit-for-bit for colors below 0.25.
constexpr std::array<const char *, 21> kProps{"x",       "y",      "z",      "nx",      "ny",      "nz",    "f_dc_0",
                                              "f_dc_1",  "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
                                              "rot_1",   "rot_2",  "rot_3",  "label",   "rgb_0",   "rgb_1", "rgb_2"};

std::array<double, 21> record(const GaussianCloud &c, std::size_t i) {
    const Vec3 &p = c.positions[i], &s = c.log_scales[i], &col = c.colors[i];
    const Vec4 &q = c.rotations[i];
    return {p.x(), p.y(), p.z(), 0.0, 0.0, 0.0,
            (col.x() - 0.5) / kShC0, (col.y() - 0.5) / kShC0, (col.z() - 0.5) / kShC0,
            c.opacity_logits[i], s.x(), s.y(), s.z(), q[0], q[1], q[2], q[3], c.labels[i], col.x(), col.y(), col.z()};
}

std::vector<char> read_all(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Load, "cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

int type_size(const std::string &t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

} // namespace

void write_ply(const GaussianCloud &cloud, const fs::path &path, PlyPrecision precision) {
    if (!cloud.consistent()) throw Error(ErrorKind::ContractViolation, "write_ply: inconsistent cloud");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Load, "cannot write " + path.string());
    const char *type = precision == PlyPrecision::Float32 ? "float" : "double";
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << '\n';
    for (const char *p : kProps) out << "property " << type << ' ' << p << '\n';
    out << "end_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto r = record(cloud, i);
        for (double v : r) {
            if (precision == PlyPrecision::Float32) {
                const float f = static_cast<float>(v);
                out.write(reinterpret_cast<const char *>(&f), sizeof f);
            } else {
                out.write(reinterpret_cast<const char *>(&v), sizeof v);
            }
        }
    }
    if (!out) throw Error(ErrorKind::Load, "write failed for " + path.string());
}

GaussianCloud read_ply(const fs::path &path) {
    const std::vector<char> bytes = read_all(path);
    const std::string name = path.string();
    auto fail = [&](std::size_t offset, const std::string &msg) {
        return Error(ErrorKind::Parse, name + ": " + msg + " at byte " + std::to_string(offset));
    };
    // Header.
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        if (pos >= bytes.size()) throw fail(start, "unterminated header");
        std::string line(bytes.begin() + start, bytes.begin() + pos);
        ++pos;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line() != "ply") throw fail(0, "missing ply magic");
    struct Prop {
        std::string name;
        int size;
        bool is_double;
        bool is_float;
    };
    std::vector<Prop> props;
    std::size_t count = 0;
    bool in_vertex = false, seen_format = false, seen_vertex = false;
    for (;;) {
        const std::size_t line_start = pos;
        const std::string line = next_line();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "comment" || word == "obj_info" || word.empty()) continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") throw fail(line_start, "unsupported format '" + fmt + "'");
            seen_format = true;
        } else if (word == "element") {
            std::string el;
            long long n = -1;
            ls >> el >> n;
            if (n < 0) throw fail(line_start, "bad element count");
            if (seen_vertex) throw fail(line_start, "unexpected element after vertex");
            in_vertex = el == "vertex";
            if (!in_vertex) throw fail(line_start, "unsupported element '" + el + "'");
            seen_vertex = true;
            count = static_cast<std::size_t>(n);
        } else if (word == "property") {
            std::string type, pname;
            ls >> type >> pname;
            if (type == "list") throw fail(line_start, "list properties are not supported");
            const int sz = type_size(type);
            if (sz == 0 || pname.empty()) throw fail(line_start, "bad property '" + line + "'");
            if (!in_vertex) throw fail(line_start, "property outside vertex element");
            props.push_back({pname, sz, sz == 8 && type != "int64", type == "float" || type == "float32"});
        } else {
            throw fail(line_start, "unknown header keyword '" + word + "'");
        }
    }
    if (!seen_format) throw fail(pos, "missing format line");
    // Locate required properties.
    std::vector<int> slot(kProps.size(), -1);
    std::vector<std::size_t> offset(props.size());
    std::size_t stride = 0;
    for (std::size_t p = 0; p < props.size(); ++p) {
        offset[p] = stride;
        stride += props[p].size;
        for (std::size_t k = 0; k < kProps.size(); ++k)
            if (props[p].name == kProps[k]) {
                if (!props[p].is_double && !props[p].is_float)
                    throw fail(0, "property " + props[p].name + " must be float or double");
                slot[k] = static_cast<int>(p);
            }
    }
    for (std::size_t k = 0; k < kProps.size(); ++k)
        if (slot[k] < 0 && k < 17 && (k < 3 || k > 5)) throw fail(0, std::string("missing property ") + kProps[k]);
    const std::size_t body = pos;
    if (bytes.size() < body + count * stride)
        throw fail(bytes.size(), "truncated body: expected " + std::to_string(count * stride) + " bytes of vertex data");
    if (bytes.size() != body + count * stride) throw fail(body + count * stride, "trailing bytes after vertex data");

    GaussianCloud cloud;
    cloud.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const char *rec = bytes.data() + body + i * stride;
        auto get = [&](std::size_t k) -> double {
            if (slot[k] < 0) return 0.0;
            const Prop &p = props[slot[k]];
            const char *src = rec + offset[slot[k]];
            if (p.is_double) {
                double d;
                std::memcpy(&d, src, 8);
                return d;
            }
            float f;
            std::memcpy(&f, src, 4);
            return f;
        };
        Vec3 color(get(6) * kShC0 + 0.5, get(7) * kShC0 + 0.5, get(8) * kShC0 + 0.5);
        if (slot[18] >= 0 && slot[19] >= 0 && slot[20] >= 0) color = Vec3(get(18), get(19), get(20));
        cloud.push_back(Vec3(get(0), get(1), get(2)), Vec3(get(10), get(11), get(12)),
                        Vec4(get(13), get(14), get(15), get(16)), get(9), color, get(17));
    }
    return cloud;
}

namespace {

json track_json(const PoseTrack &t) {
    json knots = json::array();
    for (const auto &k : t.knots) {
        const Mat3 r = pose_rotation(k.pose);
        json rot = json::array();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) rot.push_back(r(a, b));
        json r6 = json::array();
        for (int a = 0; a < 6; ++a) r6.push_back(k.pose.rot6d[a]);
        knots.push_back({{"frame_index", k.frame_index},
                         {"rotation", rot},
                         {"translation", {k.pose.translation.x(), k.pose.translation.y(), k.pose.translation.z()}},
                         {"rot6d", r6},
                         {"reference_frame_index", k.pose.reference_frame_index}});
    }
    return {{"pivot", {t.pivot.x(), t.pivot.y(), t.pivot.z()}}, {"step", t.step}, {"knots", knots}};
}

PoseTrack json_track(const json &j) {
    PoseTrack t;
    const json &p = j.at("pivot");
    t.pivot = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    t.step = j.at("step").get<int>();
    int prev = 0;
    for (const auto &k : j.at("knots")) {
        TrackKnot knot;
        knot.frame_index = k.at("frame_index").get<int>();
        if (!t.knots.empty() && knot.frame_index <= prev)
            throw Error(ErrorKind::Parse, "pose track knots must have increasing frame indices");
        prev = knot.frame_index;
        const json &tr = k.at("translation");
        knot.pose.translation = Vec3(tr.at(0).get<double>(), tr.at(1).get<double>(), tr.at(2).get<double>());
        if (k.contains("rot6d")) {
            const json &r6 = k.at("rot6d");
            if (r6.size() != 6) throw Error(ErrorKind::Parse, "rot6d must have 6 entries");
            for (int a = 0; a < 6; ++a) knot.pose.rot6d[a] = r6.at(a).get<double>();
        } else {
            const json &rot = k.at("rotation");
            if (rot.size() != 9) throw Error(ErrorKind::Parse, "rotation must have 9 entries");
            Mat3 r;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) r(a, b) = rot.at(a * 3 + b).get<double>();
            knot.pose.rot6d = rotmat_to_sixd(r);
        }
        knot.pose.reference_frame_index = k.value("reference_frame_index", 0);
        t.knots.push_back(knot);
    }
    return t;
}

std::string read_text(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Load, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Load, "cannot write " + path.string());
    out << text;
}

} // namespace

std::string track_to_json(const PoseTrack &track) { return track_json(track).dump(1) + "\n"; }

PoseTrack track_from_json(const std::string &text) {
    try {
        return json_track(json::parse(text));
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Parse, std::string("pose track: ") + e.what());
    }
}

void write_track(const PoseTrack &track, const fs::path &path) { write_text(path, track_to_json(track)); }

PoseTrack read_track(const fs::path &path) { return track_from_json(read_text(path)); }

void export_model(const SceneModel &model, const fs::path &dir, PlyPrecision precision) {
    fs::create_directories(dir);
    write_ply(model.background, dir / "background.ply", precision);
    write_ply(model.object, dir / "object.ply", precision);
    json meta = json::object();
    for (const auto &[k, v] : model.metadata) meta[k] = v;
    const json scene = {{"format", "egogs-scene"},
                        {"version", 1},
                        {"background", "background.ply"},
                        {"object", "object.ply"},
                        {"track", track_json(model.track)},
                        {"metadata", meta}};
    write_text(dir / "scene.json", scene.dump(1) + "\n");
}

SceneModel import_model(const fs::path &dir) {
    const std::string text = read_text(dir / "scene.json");
    SceneModel m;
    try {
        const json scene = json::parse(text);
        m.background = read_ply(dir / scene.at("background").get<std::string>());
        m.object = read_ply(dir / scene.at("object").get<std::string>());
        m.track = json_track(scene.at("track"));
        for (const auto &[k, v] : scene.at("metadata").items()) m.metadata[k] = v.get<std::string>();
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Parse, (dir / "scene.json").string() + ": " + e.what());
    }
    return m;
}

} // namespace egogs
