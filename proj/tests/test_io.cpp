// Copyright 2026 The MeshForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <random>

#include "meshforge/io.hpp"
#include "meshforge/mesher.hpp"
#include "test_support.hpp"

namespace meshforge {
namespace {

using testing::RandomPose;

std::string MessageOf(const std::function<void()>& fn, Errc expected) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(Sha256Hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(Sha256Hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, HasNoTimeDependentFields) {
  Manifest m;
  m.config_hash = Sha256Hex("cfg");
  m.AddInput("a.json", "{}");
  Json j = m.ToJson();
  EXPECT_EQ(j.at("tool"), std::string(kToolVersion));
  EXPECT_EQ(j.at("inputs").at("a.json"), Sha256Hex("{}"));
  EXPECT_EQ(j.dump(), m.ToJson().dump());
}

TEST(PoseJson, RoundTripsExactly) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    Pose p = RandomPose(rng, 2.0);
    Json j = Json::parse(PoseToJson(p).dump());
    Pose q = PoseFromJson(j);
    EXPECT_EQ(p.r, q.r);
    EXPECT_EQ(p.t, q.t);
  }
}

TEST(PoseJson, RejectsNonRotations) {
  Json j = PoseToJson(Pose{});
  Json bad = j;
  bad[0] = 2.0;
  MessageOf([&] { PoseFromJson(bad); }, Errc::kParse);
  bad = j;
  bad[0] = -1.0;
  bad[5] = -1.0;
  bad[10] = -1.0;  // reflection
  MessageOf([&] { PoseFromJson(bad); }, Errc::kParse);
  bad = j;
  bad[15] = 2.0;
  MessageOf([&] { PoseFromJson(bad); }, Errc::kParse);
  MessageOf([&] { PoseFromJson(Json::array({1, 2, 3})); }, Errc::kParse);
}

TEST(IntrinsicsJson, RoundTripsAndDefaultsDistortion) {
  CameraIntrinsics c = testing::BoardIntrinsics();
  c.k3 = 0.004;
  CameraIntrinsics d = IntrinsicsFromJson(Json::parse(IntrinsicsToJson(c).dump()));
  EXPECT_EQ(IntrinsicsToJson(c), IntrinsicsToJson(d));

  Json j = Json::parse(R"({"width": 64, "height": 48, "fx": 50, "fy": 50, "cx": 32, "cy": 24})");
  CameraIntrinsics e = IntrinsicsFromJson(j);
  EXPECT_EQ(e.k1, 0.0);
  EXPECT_EQ(e.p2, 0.0);

  j.erase("fx");
  MessageOf([&] { IntrinsicsFromJson(j); }, Errc::kParse);
}

TEST(PosesJson, RoundTripAndDuplicateFrame) {
  std::mt19937_64 rng(5);
  FramePoses poses{{0, RandomPose(rng)}, {7, RandomPose(rng)}, {3, RandomPose(rng)}};
  FramePoses back = PosesFromJson(Json::parse(PosesToJson(poses).dump()));
  ASSERT_EQ(back.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].first, poses[i].first);
    EXPECT_EQ(back[i].second.t, poses[i].second.t);
  }
  Json dup = PosesToJson(poses);
  dup[2]["frame"] = 7;
  std::string msg = MessageOf([&] { PosesFromJson(dup); }, Errc::kParse);
  EXPECT_NE(msg.find("duplicate frame 7"), std::string::npos) << msg;
}

TEST(CorrespondencesJson, RoundTrip) {
  CorrespondenceSet c{"left", "right", {{Vec3(1, 2, 3), Vec3(4, 5, 6)}, {Vec3(-0.5, 0.25, 1e-9), Vec3(0, 0, 0)}}};
  CorrespondenceSet d = CorrespondencesFromJson(Json::parse(CorrespondencesToJson(c).dump()));
  EXPECT_EQ(d.source_id, "left");
  EXPECT_EQ(d.target_id, "right");
  ASSERT_EQ(d.pairs.size(), 2u);
  EXPECT_EQ(d.pairs[1].first, c.pairs[1].first);
  EXPECT_EQ(d.pairs[0].second, c.pairs[0].second);

  Json bad = CorrespondencesToJson(c);
  bad["pairs"][0]["src"] = Json::array({1, 2});
  MessageOf([&] { CorrespondencesFromJson(bad); }, Errc::kParse);
}

TEST(MarkersJson, RoundTripAndCornerCount) {
  MarkerSpec spec;
  spec.rows = 2;
  spec.cols = 3;
  spec.square_size = 0.025;
  spec.anchor_index = 4;
  MarkerObservation a{2, {}, spec, std::nullopt}, b{9, {}, spec, Pixel(10.5, 20.25)};
  for (int i = 0; i < spec.corner_count(); ++i) {
    a.corners2d.emplace_back(i, 2 * i);
    b.corners2d.emplace_back(100 + i, 50 - i);
  }
  auto back = MarkersFromJson(Json::parse(MarkersToJson({a, b}).dump()));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].frame_id, 2);
  EXPECT_EQ(back[1].spec.anchor_index, 4);
  EXPECT_EQ(back[1].spec.square_size, 0.025);
  EXPECT_FALSE(back[0].anchor_pixel.has_value());
  ASSERT_TRUE(back[1].anchor_pixel.has_value());
  EXPECT_EQ(*back[1].anchor_pixel, Pixel(10.5, 20.25));
  EXPECT_EQ(back[1].corners2d, b.corners2d);

  Json bad = MarkersToJson({a});
  bad["frames"][0]["corners2d"].erase(0);
  std::string msg = MessageOf([&] { MarkersFromJson(bad); }, Errc::kParse);
  EXPECT_NE(msg.find("frame 2"), std::string::npos) << msg;
}

TEST(FieldJson, ShapeAndTextureRoundTrip) {
  Shape s = (Shape::Box(Vec3(0, 0, 0), Vec3(0.3, 0.2, 0.1)) - Shape::Sphere(Vec3(0.1, 0, 0), 0.12)) |
            (Shape::Torus(Vec3(0, 0, 0.2), 0.2, 0.05) &
             Shape::Cylinder(Vec3(0, 0, 0.2), Vec3(0, 1, 1).normalized(), 0.3, 0.1));
  AnalyticField f(s, CheckerTexture{Vec3(1, 0, 0), Vec3(0, 0, 1), 0.07}, 0.4);
  Json j = AnalyticFieldToJson(f);
  AnalyticField g = AnalyticFieldFromJson(Json::parse(j.dump()));
  EXPECT_EQ(AnalyticFieldToJson(g), j);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    Vec3 p(u(rng), u(rng), u(rng));
    EXPECT_EQ(f.Scalar(p), g.Scalar(p));
    EXPECT_EQ(f.Color(p, Vec3::UnitZ()), g.Color(p, Vec3::UnitZ()));
  }
  MessageOf([&] { ShapeFromJson(Json::parse(R"({"cone": {}})")); }, Errc::kParse);
  MessageOf([&] { TextureFromJson(Json::parse(R"({"noise": {}})")); }, Errc::kParse);
}

GridField SmallGrid() {
  AnalyticField f(Shape::Sphere(Vec3(0.01, 0, 0), 0.3), GradientTexture{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3::UnitX()});
  return GridField::Sample(f, {5, 4, 3}, Aabb(Vec3(-0.5, -0.4, -0.45), Vec3(0.5, 0.4, 0.45)));
}

TEST(GridFormat, LayoutAndRoundTrip) {
  GridField g = SmallGrid();
  std::string bytes = EncodeGrid(g);
  const size_t n = 5 * 4 * 3;
  EXPECT_EQ(bytes.size(), 4 + 4 + 12 + 48 + 4 * n + 3 * n);
  EXPECT_EQ(bytes.substr(0, 4), "VGRD");
  uint32_t u;
  std::memcpy(&u, bytes.data() + 4, 4);
  EXPECT_EQ(u, 1u);
  std::memcpy(&u, bytes.data() + 8, 4);
  EXPECT_EQ(u, 5u);
  double lo_x;
  std::memcpy(&lo_x, bytes.data() + 20, 8);
  EXPECT_EQ(lo_x, -0.5);

  GridField h = DecodeGrid(bytes);
  EXPECT_EQ(h.dims(), g.dims());
  EXPECT_EQ(h.Bounds().min, g.Bounds().min);
  EXPECT_EQ(h.Bounds().max, g.Bounds().max);
  for (size_t i = 0; i < n; ++i) {
    EXPECT_EQ(h.scalars()[i], static_cast<double>(static_cast<float>(g.scalars()[i])));
    EXPECT_LE((h.colors()[i] - g.colors()[i]).cwiseAbs().maxCoeff(), 0.5 / 255.0 + 1e-12);
  }
  EXPECT_EQ(EncodeGrid(h), bytes);
}

TEST(GridFormat, TruncationNamesByteOffset) {
  std::string bytes = EncodeGrid(SmallGrid());
  for (size_t cut : {size_t{2}, size_t{10}, size_t{40}, size_t{100}, bytes.size() - 1}) {
    std::string msg = MessageOf([&] { DecodeGrid(std::string_view(bytes).substr(0, cut), "field.vgrd"); }, Errc::kParse);
    EXPECT_NE(msg.find("field.vgrd"), std::string::npos) << msg;
    EXPECT_NE(msg.find("byte offset " + std::to_string(cut)), std::string::npos) << msg;
  }
}

TEST(GridFormat, RejectsBadHeaderAndTrailingBytes) {
  std::string bytes = EncodeGrid(SmallGrid());
  std::string bad = bytes;
  bad[0] = 'X';
  MessageOf([&] { DecodeGrid(bad); }, Errc::kParse);
  bad = bytes;
  bad[4] = 2;
  MessageOf([&] { DecodeGrid(bad); }, Errc::kParse);
  bad = bytes;
  bad[8] = 1;  // nx = 1
  MessageOf([&] { DecodeGrid(bad); }, Errc::kParse);
  std::string msg = MessageOf([&] { DecodeGrid(bytes + "xy"); }, Errc::kParse);
  EXPECT_NE(msg.find("byte offset " + std::to_string(bytes.size())), std::string::npos) << msg;
}

TriangleMesh SphereMesh() {
  AnalyticField f(Shape::Sphere(Vec3::Zero(), 0.4), CheckerTexture{Vec3(1, 0.5, 0), Vec3(0, 0.2, 1), 0.1});
  MeshingConfig cfg;
  cfg.resolution = {20, 20, 20};
  cfg.bbox = Aabb(Vec3::Constant(-0.5), Vec3::Constant(0.5));
  TriangleMesh m = VertexNormals(MarchingCubes(f, cfg), f, 1e-4);
  return Colorize(std::move(m), f, ColorMode::OppositeNormal());
}

TEST(PlyFormat, RoundTripWithComments) {
  TriangleMesh m = SphereMesh();
  ASSERT_TRUE(m.has_normals());
  ASSERT_TRUE(m.has_colors());
  std::vector<std::string> comments{"manifest {\"tool\":\"x\"}", "second line"};
  std::string bytes = EncodePly(m, comments);
  EXPECT_EQ(bytes.rfind("ply\nformat binary_little_endian 1.0\ncomment manifest", 0), 0u);
  PlyFile back = DecodePly(bytes);
  EXPECT_EQ(back.comments, comments);
  ASSERT_EQ(back.mesh.vertices.size(), m.vertices.size());
  EXPECT_EQ(back.mesh.faces, m.faces);
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    EXPECT_LE((back.mesh.vertices[i] - m.vertices[i]).norm(), 1e-6);
    EXPECT_LE((back.mesh.normals[i] - m.normals[i]).norm(), 1e-6);
    EXPECT_LE((back.mesh.colors[i] - m.colors[i]).cwiseAbs().maxCoeff(), 0.5 / 255.0 + 1e-12);
  }
  EXPECT_EQ(EncodePly(back.mesh, back.comments), bytes);
}

TEST(PlyFormat, OptionalAttributesAndEmptyMesh) {
  TriangleMesh m = SphereMesh();
  m.normals.clear();
  m.colors.clear();
  std::string bytes = EncodePly(m);
  EXPECT_EQ(bytes.find("property float nx"), std::string::npos);
  EXPECT_EQ(bytes.find("property uchar red"), std::string::npos);
  PlyFile back = DecodePly(bytes);
  EXPECT_FALSE(back.mesh.has_normals());
  EXPECT_FALSE(back.mesh.has_colors());

  PlyFile empty = DecodePly(EncodePly(TriangleMesh{}));
  EXPECT_TRUE(empty.mesh.vertices.empty());
  EXPECT_TRUE(empty.mesh.faces.empty());
}

TEST(PlyFormat, Errors) {
  std::string bytes = EncodePly(SphereMesh());
  MessageOf([&] { DecodePly(bytes.substr(0, bytes.size() - 3)); }, Errc::kParse);
  MessageOf([&] { DecodePly(bytes + "z"); }, Errc::kParse);
  MessageOf([&] { DecodePly("ply\nformat ascii 1.0\nend_header\n"); }, Errc::kParse);
  MessageOf([&] { DecodePly("not a ply"); }, Errc::kParse);
  MessageOf([&] { EncodePly(TriangleMesh{}, {"two\nlines"}); }, Errc::kInvalidArgument);

  TriangleMesh tri;
  tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  tri.faces = {{0, 1, 2}};
  std::string t = EncodePly(tri);
  uint32_t big = 7;
  std::memcpy(t.data() + t.size() - 4, &big, 4);
  std::string msg = MessageOf([&] { DecodePly(t); }, Errc::kParse);
  EXPECT_NE(msg.find("out of range"), std::string::npos) << msg;
}

TEST(PpmFormat, RoundTripAndErrors) {
  Image img(7, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 7; ++x) img.at(x, y) = Rgb(x / 6.0, y / 2.0, 0.5);
  std::string bytes = EncodePpm(img);
  EXPECT_EQ(bytes.rfind("P6\n7 3\n255\n", 0), 0u);
  EXPECT_EQ(bytes.size(), 11u + 7 * 3 * 3);
  Image back = DecodePpm(bytes);
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(EncodePpm(back), bytes);
  EXPECT_EQ(back.at(6, 2), Rgb(1.0, 1.0, 128 / 255.0));

  Image commented = DecodePpm("P6\n# c\n1 1\n255\n\x01\x02\x03");
  EXPECT_EQ(commented.at(0, 0), Rgb(1 / 255.0, 2 / 255.0, 3 / 255.0));
  MessageOf([&] { DecodePpm(bytes.substr(0, bytes.size() - 1)); }, Errc::kParse);
  MessageOf([&] { DecodePpm("P3\n1 1\n255\n0 0 0"); }, Errc::kParse);
  MessageOf([&] { DecodePpm("P6\n1 1\n65535\n"); }, Errc::kParse);
}

TEST(MetricsCsv, GoldenRows) {
  EvalReport r;
  r.per_frame.push_back({0, {0.1, 0.2, PsnrFromRmse(0.2), 100}, 0.5});
  r.per_frame.push_back({12, {0.0, 0.0, kPsnrCap, 100}, 0.5});
  r.excluded = {3, 4};
  r.aggregate = {0.05, 0.1, PsnrFromRmse(0.1), 200};
  const std::string expected =
      "# manifest {\"tool\":\"t\"}\n"
      "# excluded 3 4\n"
      "frame_id,mae,rmse,psnr\n"
      "0,0.1,0.2,13.9794001\n"
      "12,0,0,99\n"
      "aggregate,0.05,0.1,20\n";
  EXPECT_EQ(EncodeMetricsCsv(r, R"({"tool":"t"})"), expected);

  EvalReport plain;
  plain.aggregate = {0.25, 0.5, PsnrFromRmse(0.5), 1};
  EXPECT_EQ(EncodeMetricsCsv(plain), "frame_id,mae,rmse,psnr\naggregate,0.25,0.5,6.02059991\n");
}

TEST(FormatReal, NineSignificantDigits) {
  EXPECT_EQ(FormatReal(1.0), "1");
  EXPECT_EQ(FormatReal(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(FormatReal(1.5e-12), "1.5e-12");
}

TEST(Files, WriteCreatesParentsAndReadsBack) {
  auto dir = testing::TempDir("io_files");
  auto path = dir / "a" / "b" / "blob.bin";
  std::string data("\0\1\2binary", 9);
  WriteFileBytes(path, data);
  EXPECT_EQ(ReadFileBytes(path), data);
  MessageOf([&] { ReadFileBytes(dir / "missing"); }, Errc::kIo);
  MessageOf([&] { ParseJson("{bad", "cfg.json"); }, Errc::kParse);
}

}  // namespace
}  // namespace meshforge
