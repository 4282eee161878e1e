// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/error.hpp"
#include "egogs/geometry.hpp"
#include "egogs/model_io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace egogs {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

std::vector<char> bytes(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path &p, const std::vector<char> &b) {
    std::ofstream out(p, std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

SceneModel random_model(std::mt19937_64 &rng) {
    SceneModel m;
    m.background = testing::random_cloud(rng, 57, 1.0, 4.0, 0.8, 0.001, 0.3, 0.001, 0.999);
    m.object = testing::random_cloud(rng, 23, 1.0, 2.0, 0.3, 0.01, 0.05);
    m.object.colors[0] = Vec3(0.0, 1e-17, 1.0);
    m.track.pivot = testing::random_vec3(rng, -1, 1);
    m.track.step = 6;
    for (int k = 0; k < 5; ++k) {
        RigidPose p;
        p.translation = testing::random_vec3(rng, -0.3, 0.3);
        std::normal_distribution<double> n;
        for (int a = 0; a < 6; ++a) p.rot6d[a] = n(rng);
        p.reference_frame_index = 38;
        m.track.knots.push_back({38 + 6 * k, p});
    }
    m.metadata["seed"] = "7";
    m.metadata["config"] = "desk";
    return m;
}

TEST(Ply, RoundTripIsLossless) {
    TempDir dir("ply");
    std::mt19937_64 rng(1);
    const SceneModel m = random_model(rng);
    write_ply(m.background, dir.path() / "bg.ply");
    EXPECT_EQ(read_ply(dir.path() / "bg.ply"), m.background);
    write_ply(m.object, dir.path() / "obj.ply");
    EXPECT_EQ(read_ply(dir.path() / "obj.ply"), m.object);
}

TEST(Ply, HeaderFollowsSplatLayout) {
    TempDir dir("ply_header");
    std::mt19937_64 rng(2);
    const GaussianCloud c = testing::random_cloud(rng, 3, 1.0, 2.0, 0.5, 0.01, 0.1);
    write_ply(c, dir.path() / "c.ply", PlyPrecision::Float32);
    const auto b = bytes(dir.path() / "c.ply");
    const std::string text(b.begin(), b.end());
    const std::size_t end = text.find("end_header\n");
    ASSERT_NE(end, std::string::npos);
    const std::string header = text.substr(0, end);
    for (const char *p : {"property float x", "property float f_dc_0", "property float opacity",
                          "property float scale_2", "property float rot_3", "element vertex 3"})
        EXPECT_NE(header.find(p), std::string::npos) << p;
    // f_dc is the zeroth-order SH coefficient of the color.
    const GaussianCloud back = read_ply(dir.path() / "c.ply");
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_NEAR((back.colors[i] - c.colors[i]).norm(), 0.0, 1e-6);
        EXPECT_NEAR((back.positions[i] - c.positions[i]).norm(), 0.0, 1e-6);
    }
    float f_dc0;
    std::memcpy(&f_dc0, b.data() + end + 11 + 6 * 4, 4);
    EXPECT_NEAR(f_dc0, (c.colors[0].x() - 0.5) / kShC0, 1e-5);
}

TEST(Ply, EmptyCloud) {
    TempDir dir("ply_empty");
    write_ply(GaussianCloud{}, dir.path() / "e.ply");
    EXPECT_TRUE(read_ply(dir.path() / "e.ply").empty());
}

TEST(Ply, TruncatedAndMalformedFilesRaiseParseErrors) {
    TempDir dir("ply_bad");
    std::mt19937_64 rng(3);
    write_ply(testing::random_cloud(rng, 10, 1.0, 2.0, 0.5, 0.01, 0.1), dir.path() / "ok.ply");
    const auto good = bytes(dir.path() / "ok.ply");
    auto expect_parse = [&](const std::vector<char> &b, const char *what) {
        write_bytes(dir.path() / "bad.ply", b);
        try {
            read_ply(dir.path() / "bad.ply");
            ADD_FAILURE() << what;
        } catch (const Error &e) {
            EXPECT_EQ(e.kind(), ErrorKind::Parse) << what;
            EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos) << what;
        }
    };
    expect_parse(std::vector<char>(good.begin(), good.end() - 9), "truncated body");
    expect_parse(std::vector<char>(good.begin(), good.begin() + 40), "truncated header");
    std::vector<char> magic = good;
    magic[0] = 'x';
    expect_parse(magic, "bad magic");
    std::string text(good.begin(), good.end());
    text.replace(text.find("binary_little_endian"), 20, "ascii               ");
    expect_parse(std::vector<char>(text.begin(), text.end()), "ascii format");
}

TEST(Track, JsonRoundTripIsBitExact) {
    TempDir dir("track");
    std::mt19937_64 rng(4);
    const SceneModel m = random_model(rng);
    write_track(m.track, dir.path() / "t.json");
    const PoseTrack back = read_track(dir.path() / "t.json");
    EXPECT_EQ(back, m.track);
    write_track(back, dir.path() / "t2.json");
    EXPECT_EQ(bytes(dir.path() / "t.json"), bytes(dir.path() / "t2.json"));
}

TEST(Track, RotationOnlyRecordsAreAccepted) {
    const std::string text = R"({"pivot":[0,0,0],"step":1,"knots":[{"frame_index":3,
        "rotation":[0,-1,0,1,0,0,0,0,1],"translation":[1,2,3]}]})";
    const PoseTrack t = track_from_json(text);
    ASSERT_EQ(t.knots.size(), 1u);
    EXPECT_NEAR((pose_rotation(t.knots[0].pose) - testing::rot_z(M_PI / 2)).norm(), 0.0, 1e-15);
    EXPECT_THROW(track_from_json("{\"pivot\":[0,0,0],\"step\":1,\"knots\":[{\"frame_index\":3,"
                                 "\"translation\":[0,0,0],\"rot6d\":[1,0,0,0,1,0]},{\"frame_index\":2,"
                                 "\"translation\":[0,0,0],\"rot6d\":[1,0,0,0,1,0]}]}"),
                 Error);
}

TEST(Model, ExportImportRoundTrip) {
    TempDir dir("model");
    std::mt19937_64 rng(5);
    const SceneModel m = random_model(rng);
    export_model(m, dir.path() / "m");
    EXPECT_EQ(import_model(dir.path() / "m"), m);
    SceneModel empty;
    export_model(empty, dir.path() / "e");
    EXPECT_EQ(import_model(dir.path() / "e"), empty);
}

TEST(Model, TruncatedCloudYieldsNoModel) {
    TempDir dir("model_trunc");
    std::mt19937_64 rng(6);
    export_model(random_model(rng), dir.path());
    auto b = bytes(dir.path() / "object.ply");
    b.resize(b.size() - 100);
    write_bytes(dir.path() / "object.ply", b);
    EXPECT_THROW(import_model(dir.path()), Error);
}

} // namespace
} // namespace egogs
