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

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "meshforge/io.hpp"

namespace meshforge {

/// Camera-to-world pose looking from `eye` at `target` (x right, y down,
/// z forward).
inline Pose LookAt(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
  const Vec3 f = (target - eye).normalized();
  Vec3 r = f.cross(up);
  if (r.norm() < 1e-9) r = f.cross(Vec3::UnitX());
  r.normalize();
  const Vec3 d = f.cross(r);
  Mat3 rot;
  rot << r, d, f;
  return {rot, eye};
}

/// Intrinsics shared by the synthetic scenes: 320x240 with mild distortion.
inline CameraIntrinsics FixtureIntrinsics() {
  CameraIntrinsics c;
  c.width = 320;
  c.height = 240;
  c.fx = 300.0;
  c.fy = 300.0;
  c.cx = 160.0;
  c.cy = 120.0;
  c.k1 = -0.05;
  c.k2 = 0.01;
  c.k3 = 0.0;
  c.p1 = 0.0005;
  c.p2 = -0.0003;
  return c;
}

/// `count` cameras on a ring of `radius` around `center`, at `elevation`
/// radians above the xy-plane.
inline std::vector<Pose> RingCameras(int count, double radius, double elevation, const Vec3& center = Vec3::Zero(),
                                     double phase = 0.0) {
  std::vector<Pose> out;
  for (int i = 0; i < count; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * i / count;
    Vec3 eye = center + radius * Vec3(std::cos(elevation) * std::cos(a), std::cos(elevation) * std::sin(a),
                                      std::sin(elevation));
    out.push_back(LookAt(eye, center));
  }
  return out;
}

/// Checkerboard lying in the tangent plane of a metric sphere (centered at
/// the origin) with its anchor corner on the sphere, seen by `camera`
/// (camera-to-world, metric). The anchor sits `tilt` radians away from the
/// point facing the camera, so the board is seen obliquely.
inline MarkerObservation TangentBoard(int frame_id, const Pose& camera, const CameraIntrinsics& intr, double radius,
                                      const MarkerSpec& spec, double tilt = 0.45) {
  const Vec3 to_cam = camera.t.normalized();
  Vec3 side = to_cam.cross(Vec3::UnitZ());
  if (side.norm() < 1e-9) side = Vec3::UnitX();
  side.normalize();
  const Vec3 n = (std::cos(tilt) * to_cam + std::sin(tilt) * side).normalized();
  const Vec3 anchor = radius * n;
  Vec3 u = n.cross(Vec3::UnitZ());
  if (u.norm() < 1e-9) u = n.cross(Vec3::UnitX());
  u.normalize();
  const Vec3 v = n.cross(u);
  const auto corners = MarkerCorners3d(spec);
  const Vec3 origin = anchor - corners[spec.anchor_index].x() * u - corners[spec.anchor_index].y() * v;
  const Pose world_from_cam_inv = Invert(camera);
  MarkerObservation o;
  o.frame_id = frame_id;
  o.spec = spec;
  for (const auto& c : corners) o.corners2d.push_back(Project(intr, Apply(world_from_cam_inv, origin + c.x() * u + c.y() * v)));
  return o;
}

/// One authored video: a metric scene seen through metric cameras, stored in a
/// reconstruction frame related to the metric world by recon = G(x) / rho.
struct FixtureBundle {
  std::string id;
  CameraIntrinsics intrinsics;
  FramePoses poses;  // reconstruction frame
  std::optional<AnalyticField> analytic;
  std::optional<GridField> grid;
  std::vector<MarkerObservation> markers;
};

struct Fixture {
  std::vector<FixtureBundle> bundles;
  std::vector<CorrespondenceSet> correspondences;
  Json config;  // everything except bundles and correspondence paths
};

/// Poses of metric cameras expressed in a reconstruction frame.
inline FramePoses ReconPoses(const std::vector<Pose>& metric_cameras, const Pose& g, double rho) {
  FramePoses out;
  for (size_t i = 0; i < metric_cameras.size(); ++i) {
    Pose p = Compose(g, metric_cameras[i]);
    out.emplace_back(static_cast<int>(i), Pose{p.r, p.t / rho});
  }
  return out;
}

inline MarkerSpec FixtureMarkerSpec(double metric_radius) {
  MarkerSpec s;
  s.rows = 4;
  s.cols = 5;
  s.square_size = 0.2 * metric_radius;
  s.anchor_index = 7;
  return s;
}

inline Texture FixtureTexture(double radius) {
  return CheckerTexture{Rgb(0.85, 0.35, 0.2), Rgb(0.2, 0.55, 0.85), 0.5 * radius};
}

/// Single sphere of metric radius 0.1 authored at reconstruction ratio
/// `rho` (metric = rho * recon), as an analytic field or a sampled grid.
inline Fixture ScaleFixture(double rho, bool grid, int grid_resolution = 64) {
  const double r = 0.1;
  const CameraIntrinsics intr = FixtureIntrinsics();
  const std::vector<Pose> cams = RingCameras(8, 0.4, 0.35);
  FixtureBundle b;
  b.id = "scene";
  b.intrinsics = intr;
  b.poses = ReconPoses(cams, Pose::Identity(), rho);
  AnalyticField f(Shape::Sphere(Vec3::Zero(), r / rho), FixtureTexture(r / rho));
  if (grid)
    b.grid = GridField::Sample(f, {grid_resolution, grid_resolution, grid_resolution}, f.Bounds());
  else
    b.analytic = f;
  const MarkerSpec spec = FixtureMarkerSpec(r);
  for (int i : {0, 3, 6}) b.markers.push_back(TangentBoard(i, cams[i], intr, r, spec));
  Fixture fx;
  fx.bundles.push_back(std::move(b));
  fx.config = {{"meshing", {{"resolution", 64}}}, {"eval", {{"target", "scaled"}, {"frame_sample", 8}}}};
  return fx;
}

/// Sphere of radius 0.4 (rho = 1) with a checker texture and the given view
/// dependence, seen by 24 cameras on three rings.
inline Fixture SphereFixture(double view_gain) {
  const double r = 0.4;
  const CameraIntrinsics intr = FixtureIntrinsics();
  std::vector<Pose> cams;
  for (double el : {-0.5, 0.1, 0.7})
    for (const Pose& p : RingCameras(8, 1.6, el, Vec3::Zero(), 0.3 * el)) cams.push_back(p);
  FixtureBundle b;
  b.id = "sphere";
  b.intrinsics = intr;
  b.poses = ReconPoses(cams, Pose::Identity(), 1.0);
  b.analytic = AnalyticField(Shape::Sphere(Vec3::Zero(), r), FixtureTexture(r), view_gain);
  b.markers.push_back(TangentBoard(0, cams[0], intr, r, FixtureMarkerSpec(r)));
  Fixture fx;
  fx.bundles.push_back(std::move(b));
  fx.config = {{"meshing", {{"resolution", 64}}}, {"eval", {{"target", "fragment"}, {"frame_sample", 20}}}};
  return fx;
}

/// Rigid map between the two half-sphere bundles' frames (metric units).
inline Pose HalvesOffset() {
  return {AxisAngle(Vec3::UnitX(), std::numbers::pi), Vec3(0.3, -0.2, 0.1)};
}

/// Metric sphere of radius 0.1 split into two overlapping halves (upper half
/// and lower half, each extended by a band of 0.1 r past the equator), each
/// captured by its own video with its own frame and reconstruction ratio.
/// Bundle "b" is related to the metric world by HalvesOffset(); exact
/// correspondences lie on the equator.
inline Fixture HalvesFixture(double rho_a = 0.5, double rho_b = 2.0) {
  const double r = 0.1, band = 0.1 * r;
  const CameraIntrinsics intr = FixtureIntrinsics();
  const MarkerSpec spec = FixtureMarkerSpec(r);
  // Upper cap in a frame whose +z points away from the equator.
  auto half = [&](const Vec3& c, double rho) {
    const double s = 1.0 / rho;
    Shape cap = Shape::Sphere(c * s, r * s) &
                Shape::Box(Vec3(c.x(), c.y(), c.z() + 0.6 * r - 0.5 * band) * s,
                           Vec3(1.2 * r, 1.2 * r, 0.6 * r + 0.5 * band) * s);
    return AnalyticField(cap, FixtureTexture(r * s));
  };
  Fixture fx;
  {
    FixtureBundle a;
    a.id = "a";
    a.intrinsics = intr;
    const auto cams = RingCameras(12, 0.4, 0.6);
    a.poses = ReconPoses(cams, Pose::Identity(), rho_a);
    a.analytic = half(Vec3::Zero(), rho_a);
    for (int i : {0, 4, 8}) a.markers.push_back(TangentBoard(i, cams[i], intr, r, spec));
    fx.bundles.push_back(std::move(a));
  }
  {
    const Pose g = HalvesOffset();
    FixtureBundle b;
    b.id = "b";
    b.intrinsics = intr;
    const auto cams = RingCameras(12, 0.4, -0.6, Vec3::Zero(), 0.2);
    b.poses = ReconPoses(cams, g, rho_b);
    // The flip about x maps the lower half onto an upper cap around g.t.
    b.analytic = half(g.t, rho_b);
    for (int i : {0, 4, 8}) b.markers.push_back(TangentBoard(i, cams[i], intr, r, spec));
    fx.bundles.push_back(std::move(b));
  }
  CorrespondenceSet c;
  c.source_id = "b";
  c.target_id = "a";
  for (double deg : {0.0, 100.0, 200.0, 290.0}) {
    const double t = deg * std::numbers::pi / 180.0;
    const Vec3 x(r * std::cos(t), r * std::sin(t), 0.0);
    c.pairs.emplace_back(Apply(HalvesOffset(), x), x);
  }
  fx.correspondences.push_back(std::move(c));
  fx.config = {{"meshing", {{"resolution", 64}}},
               {"icp", {{"max_correspondence_distance", 0.01}, {"max_iterations", 50}, {"reciprocal", true}}},
               {"eval", {{"target", "merged"}, {"frame_sample", 6}}}};
  return fx;
}

/// Writes a fixture as a project directory: one sub-directory per bundle and
/// config.json at the top. Returns the config path.
inline fs::path WriteFixture(const Fixture& fx, const fs::path& dir) {
  Json cfg = fx.config;
  cfg["output_dir"] = "out";
  Json bundles = Json::array();
  for (const auto& b : fx.bundles) {
    const fs::path bd = dir / b.id;
    WriteFileBytes(bd / "intrinsics.json", IntrinsicsToJson(b.intrinsics).dump(2) + "\n");
    WriteFileBytes(bd / "poses.json", PosesToJson(b.poses).dump(2) + "\n");
    Json entry = {{"id", b.id},
                  {"intrinsics", b.id + "/intrinsics.json"},
                  {"poses", b.id + "/poses.json"}};
    if (!b.markers.empty()) {
      WriteFileBytes(bd / "markers.json", MarkersToJson(b.markers).dump(2) + "\n");
      entry["markers"] = b.id + "/markers.json";
    }
    if (b.grid) {
      WriteFileBytes(bd / "field.vgrd", EncodeGrid(*b.grid));
      entry["field"] = {{"grid", b.id + "/field.vgrd"}};
    } else if (b.analytic) {
      WriteFileBytes(bd / "field.json", AnalyticFieldToJson(*b.analytic).dump(2) + "\n");
      entry["field"] = {{"file", b.id + "/field.json"}};
    } else {
      throw Error(Errc::kInvalidArgument, "fixture bundle '" + b.id + "' has no field");
    }
    bundles.push_back(std::move(entry));
  }
  cfg["bundles"] = bundles;
  Json corr = Json::array();
  for (const auto& c : fx.correspondences) {
    const std::string rel = "correspondences/" + c.source_id + "__" + c.target_id + ".json";
    WriteFileBytes(dir / rel, CorrespondencesToJson(c).dump(2) + "\n");
    corr.push_back({{"source", c.source_id}, {"target", c.target_id}, {"path", rel}});
  }
  if (!corr.empty()) cfg["correspondences"] = corr;
  const fs::path path = dir / "config.json";
  WriteFileBytes(path, cfg.dump(2) + "\n");
  return path;
}

}  // namespace meshforge
