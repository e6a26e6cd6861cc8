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
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "meshforge/camera.hpp"
#include "meshforge/geometry.hpp"

namespace meshforge::testing {

inline constexpr double kPi = std::numbers::pi;

inline Vec3 RandomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

inline Mat3 RandomRotation(std::mt19937_64& rng, double max_angle = kPi) {
  std::uniform_real_distribution<double> a(0.0, max_angle);
  return AxisAngle(RandomUnit(rng), a(rng));
}

inline Pose RandomPose(std::mt19937_64& rng, double t_scale = 1.0) {
  std::uniform_real_distribution<double> u(-t_scale, t_scale);
  return {RandomRotation(rng), Vec3(u(rng), u(rng), u(rng))};
}

/// A random checkerboard in front of a camera: depth in [0.2, 3], tilt below
/// 70 degrees, squares scaled with depth so the board stays in view.
struct SyntheticBoard {
  MarkerSpec spec;
  Pose camera_from_board;
  std::vector<Vec3> corners3d;
  std::vector<Pixel> corners2d;
};

inline CameraIntrinsics BoardIntrinsics() {
  CameraIntrinsics c;
  c.width = 640;
  c.height = 480;
  c.fx = 820.0;
  c.fy = 810.0;
  c.cx = 321.5;
  c.cy = 238.0;
  c.k1 = -0.12;
  c.k2 = 0.05;
  c.p1 = 0.001;
  c.p2 = -0.0007;
  return c;
}

inline SyntheticBoard RandomBoard(std::mt19937_64& rng, const CameraIntrinsics& intr) {
  std::uniform_real_distribution<double> depth_d(0.2, 3.0), tilt_d(0.0, 70.0 * kPi / 180.0),
      ang_d(0.0, 2.0 * kPi), off_d(-0.15, 0.15);
  SyntheticBoard b;
  b.spec.rows = 5;
  b.spec.cols = 6;
  const double depth = depth_d(rng);
  b.spec.square_size = 0.03 * depth;
  b.spec.anchor_index = 0;
  const double phi = ang_d(rng);
  const Vec3 tilt_axis(std::cos(phi), std::sin(phi), 0.0);
  const Mat3 r = AxisAngle(tilt_axis, tilt_d(rng)) * AxisAngle(Vec3::UnitZ(), ang_d(rng));
  b.corners3d = MarkerCorners3d(b.spec);
  Vec3 center = Vec3::Zero();
  for (const auto& c : b.corners3d) center += c;
  center /= static_cast<double>(b.corners3d.size());
  const Vec3 target(off_d(rng) * depth, off_d(rng) * depth, depth);
  b.camera_from_board = {r, target - r * center};
  for (const auto& c : b.corners3d) b.corners2d.push_back(Project(intr, Apply(b.camera_from_board, c)));
  return b;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("meshforge_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace meshforge::testing
