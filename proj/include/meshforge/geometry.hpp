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

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace meshforge {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
/// Linear RGB, each component in [0, 1].
using Rgb = Eigen::Vector3d;

inline bool IsFinite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Axis-aligned box. A default-constructed box is empty (min > max).
struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  Aabb() = default;
  Aabb(const Vec3& lo, const Vec3& hi) : min(lo), max(hi) {}

  bool empty() const { return (min.array() > max.array()).any(); }
  bool degenerate() const { return !(min.array() < max.array()).all(); }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return empty() ? 0.0 : extent().norm(); }

  void Extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void Extend(const Aabb& o) {
    if (o.empty()) return;
    Extend(o.min);
    Extend(o.max);
  }
  bool Contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb Padded(double margin) const {
    return {min - Vec3::Constant(margin), max + Vec3::Constant(margin)};
  }
  Vec3 Corner(int i) const {
    return {(i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(),
            (i & 4) ? max.z() : min.z()};
  }

  /// Slab test; returns the parametric [enter, exit] interval, or false.
  bool IntersectRay(const Vec3& origin, const Vec3& dir, double& t0,
                    double& t1) const {
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-300) {
        if (origin[a] < min[a] || origin[a] > max[a]) return false;
        continue;
      }
      double inv = 1.0 / dir[a];
      double ta = (min[a] - origin[a]) * inv;
      double tb = (max[a] - origin[a]) * inv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }
};

/// Rigid transform x -> r * x + t. Camera poses are stored camera-to-world
/// with OpenCV axes (+x right, +y down, +z forward).
struct Pose {
  Mat3 r = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static Pose Identity() { return {}; }
  static Pose Translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static Pose Rotation(const Mat3& r) { return {r, Vec3::Zero()}; }

  Mat4 Matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = r;
    m.topRightCorner<3, 1>() = t;
    return m;
  }
};

/// Largest absolute entry of r^T r - I.
inline double OrthonormalityDrift(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest rotation matrix in the Frobenius sense.
inline Mat3 NearestRotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

inline constexpr double kRenormalizeThreshold = 1e-9;

/// Re-orthonormalizes the rotation when it has drifted past 1e-9.
inline Pose Renormalized(const Pose& p) {
  if (OrthonormalityDrift(p.r) <= kRenormalizeThreshold) return p;
  return {NearestRotation(p.r), p.t};
}

/// Applies b first, then a.
inline Pose Compose(const Pose& a, const Pose& b) {
  return Renormalized(Pose{a.r * b.r, a.r * b.t + a.t});
}

inline Pose Invert(const Pose& p) {
  Mat3 rt = p.r.transpose();
  return {rt, -(rt * p.t)};
}

inline Vec3 Apply(const Pose& p, const Vec3& v) { return p.r * v + p.t; }

/// Builds a pose from a 4x4 matrix; the rotation block is projected onto
/// SO(3) if it has drifted.
inline Pose PoseFromMatrix(const Mat4& m) {
  return Renormalized(Pose{m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()});
}

/// The same pose with the opposite direction convention (camera-to-world
/// <-> world-to-camera).
inline Pose FlipDirection(const Pose& p) { return Invert(p); }

/// Geodesic angle between two rotations, radians.
inline double RotationAngle(const Mat3& a, const Mat3& b) {
  Mat3 d = a.transpose() * b;
  double c = std::clamp(0.5 * (d.trace() - 1.0), -1.0, 1.0);
  // acos is ill-conditioned near 0; use the skew part there.
  Vec3 s(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * s.norm(), c);
}

inline Mat3 AxisAngle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// Rodrigues map from a rotation vector.
inline Mat3 ExpSO3(const Vec3& w) {
  double a = w.norm();
  if (a < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(a, w / a).toRotationMatrix();
}

inline Mat3 Skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

}  // namespace meshforge
