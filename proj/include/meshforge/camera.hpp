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
#include <span>
#include <string>
#include <vector>

#include "meshforge/error.hpp"
#include "meshforge/geometry.hpp"

namespace meshforge {

using Pixel = Eigen::Vector2d;

/// Pinhole camera with the five-coefficient OpenCV distortion model
/// (k1, k2, k3 radial; p1, p2 tangential).
struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  double k1 = 0.0, k2 = 0.0, k3 = 0.0;
  double p1 = 0.0, p2 = 0.0;
  int width = 1, height = 1;

  void Validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(fx > 0.0 && fy > 0.0))
      throw Error(Errc::kInvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw Error(Errc::kInvalidArgument, "image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      throw Error(Errc::kInvalidArgument,
                  "principal point must lie inside the image");
    if (!(finite(k1) && finite(k2) && finite(k3) && finite(p1) && finite(p2)))
      throw Error(Errc::kInvalidArgument, "distortion coefficients not finite");
  }
};

namespace detail {

inline Vec2 Distort(const CameraIntrinsics& c, const Vec2& n) {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (c.k1 + r2 * (c.k2 + r2 * c.k3));
  return {x * radial + 2.0 * c.p1 * x * y + c.p2 * (r2 + 2.0 * x * x),
          y * radial + c.p1 * (r2 + 2.0 * y * y) + 2.0 * c.p2 * x * y};
}

/// d Distort / d n.
inline Eigen::Matrix2d DistortJacobian(const CameraIntrinsics& c,
                                       const Vec2& n) {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (c.k1 + r2 * (c.k2 + r2 * c.k3));
  const double dradial = c.k1 + r2 * (2.0 * c.k2 + 3.0 * r2 * c.k3);
  Eigen::Matrix2d j;
  j(0, 0) = radial + 2.0 * x * x * dradial + 2.0 * c.p1 * y + 6.0 * c.p2 * x;
  j(0, 1) = 2.0 * x * y * dradial + 2.0 * c.p1 * x + 2.0 * c.p2 * y;
  j(1, 0) = 2.0 * x * y * dradial + 2.0 * c.p1 * x + 2.0 * c.p2 * y;
  j(1, 1) = radial + 2.0 * y * y * dradial + 6.0 * c.p1 * y + 2.0 * c.p2 * x;
  return j;
}

}  // namespace detail

/// Projects a camera-frame point to pixel coordinates.
inline Pixel Project(const CameraIntrinsics& intr, const Vec3& p_cam) {
  if (!(p_cam.z() > 0.0))
    throw Error(Errc::kNonPositiveDepth, "point at or behind the camera plane");
  Vec2 d = detail::Distort(intr, {p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z()});
  return {intr.fx * d.x() + intr.cx, intr.fy * d.y() + intr.cy};
}

inline constexpr int kUndistortMaxIterations = 50;
inline constexpr double kUndistortTolerance = 1e-10;

/// Inverts the distortion model. Returns the normalized ray (x, y, 1).
///
/// Newton iteration on the normalized coordinates, seeded with the distorted
/// point. Convergence is declared once the residual drops below 1e-10; a few
/// extra steps then take it to rounding level so that re-projection matches
/// the input pixel to well under 1e-8 px.
inline Vec3 Undistort(const CameraIntrinsics& intr, const Pixel& px) {
  if (!std::isfinite(px.x()) || !std::isfinite(px.y()))
    throw Error(Errc::kInvalidArgument, "pixel not finite");
  const Vec2 target((px.x() - intr.cx) / intr.fx, (px.y() - intr.cy) / intr.fy);
  Vec2 n = target;
  bool converged = false;
  int polish = 0;
  for (int it = 0; it < kUndistortMaxIterations; ++it) {
    Vec2 e = detail::Distort(intr, n) - target;
    double err = e.cwiseAbs().maxCoeff();
    if (!std::isfinite(err)) break;
    if (err <= kUndistortTolerance) {
      converged = true;
      if (err == 0.0 || polish++ >= 3) break;
    }
    Eigen::Matrix2d j = detail::DistortJacobian(intr, n);
    double det = j.determinant();
    if (std::abs(det) < 1e-300) break;
    Vec2 step = j.inverse() * e;
    if (converged && step.cwiseAbs().maxCoeff() == 0.0) break;
    n -= step;
  }
  // A root past the fold of the radial polynomial maps to the pixel but is
  // not the physical ray.
  if (converged) {
    const double r2 = n.squaredNorm();
    const double radial = 1.0 + r2 * (intr.k1 + r2 * (intr.k2 + r2 * intr.k3));
    if (!(radial > 0.0 && detail::DistortJacobian(intr, n).determinant() > 0.0)) converged = false;
  }
  if (!converged)
    throw Error(Errc::kNoConvergence,
                "undistortion did not converge for pixel (" +
                    std::to_string(px.x()) + ", " + std::to_string(px.y()) +
                    ")");
  return {n.x(), n.y(), 1.0};
}

/// Checkerboard description: inner-corner grid and physical square size.
struct MarkerSpec {
  int rows = 2;
  int cols = 2;
  double square_size = 1.0;  // meters
  int anchor_index = 0;

  int corner_count() const { return rows * cols; }

  void Validate() const {
    if (rows < 2 || cols < 2)
      throw Error(Errc::kInvalidArgument, "marker needs at least 2x2 corners");
    if (!(square_size > 0.0))
      throw Error(Errc::kInvalidArgument, "square_size must be positive");
    if (anchor_index < 0 || anchor_index >= corner_count())
      throw Error(Errc::kInvalidArgument, "anchor_index out of range");
  }
};

/// Board-frame corner positions, row-major with x along columns, y along
/// rows, z = 0.
inline std::vector<Vec3> MarkerCorners3d(const MarkerSpec& spec) {
  spec.Validate();
  std::vector<Vec3> out;
  out.reserve(spec.corner_count());
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c)
      out.emplace_back(c * spec.square_size, r * spec.square_size, 0.0);
  return out;
}

inline Vec3 MarkerAnchor(const MarkerSpec& spec) {
  return MarkerCorners3d(spec)[spec.anchor_index];
}

struct MarkerPoseResult {
  Pose camera_from_board;
  double rms_reprojection_px = 0.0;
  int iterations = 0;
};

namespace detail {

/// Similarity that maps points to zero mean and mean distance sqrt(2).
inline Eigen::Matrix3d HartleyNormalizer(std::span<const Vec2> pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

inline double ReprojectionSse(const CameraIntrinsics& intr, const Pose& pose,
                              std::span<const Vec3> pts,
                              std::span<const Pixel> obs) {
  double sse = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    Vec3 pc = Apply(pose, pts[i]);
    if (!(pc.z() > 1e-12)) return std::numeric_limits<double>::infinity();
    sse += (Project(intr, pc) - obs[i]).squaredNorm();
  }
  return sse;
}

}  // namespace detail

inline constexpr int kMarkerRefineMaxIterations = 100;
inline constexpr double kMarkerRefineMinStep = 1e-12;

/// Recovers camera-from-board from coplanar board points and their detected
/// pixels.
///
/// The board plane is fitted and expressed in a 2D frame, a homography to the
/// undistorted normalized image coordinates is estimated (normalized DLT), and
/// decomposed into an initial pose. Gauss-Newton on the pixel reprojection
/// error through the full distortion model then refines it.
inline MarkerPoseResult SolveMarkerPose(std::span<const Vec3> corners3d,
                                        std::span<const Pixel> corners2d,
                                        const CameraIntrinsics& intr) {
  const size_t n = corners3d.size();
  if (n != corners2d.size())
    throw Error(Errc::kInvalidArgument,
                "corner lists differ in length: " + std::to_string(n) +
                    " vs " + std::to_string(corners2d.size()));
  if (n < 4)
    throw Error(Errc::kInsufficientPoints,
                "pose solving needs at least 4 corners, got " +
                    std::to_string(n));

  // Plane frame of the board points.
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : corners3d) centroid += p;
  centroid /= static_cast<double>(n);
  Eigen::MatrixX3d centered(n, 3);
  for (size_t i = 0; i < n; ++i) centered.row(i) = (corners3d[i] - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixX3d> plane_svd(centered, Eigen::ComputeFullV);
  const Vec3 sv = plane_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0))
    throw Error(Errc::kDegenerateConfiguration, "board corners are collinear");
  if (sv(2) > 1e-6 * sv(0))
    throw Error(Errc::kDegenerateConfiguration, "board corners are not coplanar");
  Mat3 basis;
  basis.col(0) = plane_svd.matrixV().col(0);
  basis.col(1) = plane_svd.matrixV().col(1);
  basis.col(2) = basis.col(0).cross(basis.col(1));
  const Pose plane_from_board{basis.transpose(), -(basis.transpose() * centroid)};

  std::vector<Vec2> plane_pts(n), image_pts(n);
  for (size_t i = 0; i < n; ++i) {
    plane_pts[i] = Apply(plane_from_board, corners3d[i]).head<2>();
    image_pts[i] = Undistort(intr, corners2d[i]).head<2>();
  }

  const Mat3 tp = detail::HartleyNormalizer(plane_pts);
  const Mat3 ti = detail::HartleyNormalizer(image_pts);
  Eigen::MatrixXd a(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    Vec3 x = tp * plane_pts[i].homogeneous();
    Vec3 u = ti * image_pts[i].homogeneous();
    a.row(2 * i) << x.x(), x.y(), 1.0, 0, 0, 0, -u.x() * x.x(), -u.x() * x.y(), -u.x();
    a.row(2 * i + 1) << 0, 0, 0, x.x(), x.y(), 1.0, -u.y() * x.x(), -u.y() * x.y(), -u.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> dlt(a, Eigen::ComputeFullV);
  const auto& dsv = dlt.singularValues();
  if (!(dsv(0) > 0.0) || dsv(7) <= 1e-10 * dsv(0))
    throw Error(Errc::kDegenerateConfiguration, "homography is rank deficient");
  Eigen::Matrix<double, 9, 1> h = dlt.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3 hmat = ti.inverse() * hn * tp;

  const double n1 = hmat.col(0).norm(), n2 = hmat.col(1).norm();
  if (!(n1 > 0.0 && n2 > 0.0))
    throw Error(Errc::kDegenerateConfiguration, "homography has a null column");
  double lambda = 2.0 / (n1 + n2);
  if (hmat(2, 2) < 0.0) lambda = -lambda;  // board origin in front of camera
  Mat3 r0;
  r0.col(0) = lambda * hmat.col(0);
  r0.col(1) = lambda * hmat.col(1);
  r0.col(2) = r0.col(0).cross(r0.col(1));
  Pose camera_from_plane{NearestRotation(r0), lambda * hmat.col(2)};
  Pose pose = Compose(camera_from_plane, plane_from_board);

  double cost = detail::ReprojectionSse(intr, pose, corners3d, corners2d);
  int iterations = 0;
  for (; iterations < kMarkerRefineMaxIterations && std::isfinite(cost); ++iterations) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (size_t i = 0; i < n; ++i) {
      const Vec3 rp = pose.r * corners3d[i];
      const Vec3 pc = rp + pose.t;
      const double iz = 1.0 / pc.z();
      const Vec2 xn(pc.x() * iz, pc.y() * iz);
      Eigen::Matrix<double, 2, 3> dn;
      dn << iz, 0, -xn.x() * iz, 0, iz, -xn.y() * iz;
      Eigen::Matrix<double, 2, 3> dpix =
          Eigen::DiagonalMatrix<double, 2>(intr.fx, intr.fy) *
          detail::DistortJacobian(intr, xn) * dn;
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -dpix * Skew(rp);
      j.rightCols<3>() = dpix;
      const Vec2 res = Project(intr, pc) - corners2d[i];
      jtj += j.transpose() * j;
      jtr += j.transpose() * res;
    }
    Eigen::Matrix<double, 6, 1> step = -jtj.ldlt().solve(jtr);
    if (!step.allFinite()) break;
    bool accepted = false;
    for (int halving = 0; halving < 20; ++halving) {
      Pose trial{NearestRotation(ExpSO3(step.head<3>()) * pose.r),
                 pose.t + step.tail<3>()};
      double trial_cost = detail::ReprojectionSse(intr, trial, corners3d, corners2d);
      if (trial_cost <= cost) {
        pose = trial;
        cost = trial_cost;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || step.norm() < kMarkerRefineMinStep) break;
  }

  for (const auto& p : corners3d) {
    if (!(Apply(pose, p).z() > 0.0))
      throw Error(Errc::kBehindCamera, "recovered board lies behind the camera");
  }
  return {pose, std::sqrt(cost / static_cast<double>(n)), iterations};
}

}  // namespace meshforge
