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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshforge/camera.hpp"
#include "meshforge/error.hpp"
#include "meshforge/field.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge {

/// Detected checkerboard corners in one frame of a video.
struct MarkerObservation {
  int frame_id = 0;
  std::vector<Pixel> corners2d;
  MarkerSpec spec;
  /// Operator-chosen pixel for the reconstruction ray; the anchor's
  /// reprojection when unset.
  std::optional<Pixel> anchor_pixel;
};

/// The marker anchor in metric camera coordinates, with the board pose it was
/// derived from.
struct MetricMarkerPoint {
  Vec3 point;
  Pose camera_from_board;
  double rms_reprojection_px = 0.0;
};

/// Reprojection RMS above which a marker solve is rejected.
inline constexpr double kMaxMarkerRmsPx = 2.0;

inline MetricMarkerPoint SolveMetricMarkerPoint(const MarkerObservation& obs, const CameraIntrinsics& intr,
                                                double max_rms_px = kMaxMarkerRmsPx) {
  obs.spec.Validate();
  if (static_cast<int>(obs.corners2d.size()) != obs.spec.corner_count())
    throw Error(Errc::kInvalidArgument, "frame " + std::to_string(obs.frame_id) + ": expected " +
                                            std::to_string(obs.spec.corner_count()) + " corners, got " +
                                            std::to_string(obs.corners2d.size()));
  const auto board = MarkerCorners3d(obs.spec);
  MarkerPoseResult pose = SolveMarkerPose(board, obs.corners2d, intr);
  if (!(pose.rms_reprojection_px <= max_rms_px))
    throw Error(Errc::kReprojectionTooLarge, "frame " + std::to_string(obs.frame_id) +
                                                 ": marker reprojection RMS " +
                                                 std::to_string(pose.rms_reprojection_px) + " px");
  return {Apply(pose.camera_from_board, board[obs.spec.anchor_index]), pose.camera_from_board,
          pose.rms_reprojection_px};
}

/// Metric position of the marker anchor in the camera frame.
inline Vec3 MetricMarkerPointOf(const MarkerObservation& obs, const CameraIntrinsics& intr) {
  return SolveMetricMarkerPoint(obs, intr).point;
}

/// Casts the ray through `pixel` from a reconstruction-space camera
/// (camera-to-world `pose`) and returns the first surface hit in that
/// camera's frame, in reconstruction units.
inline Vec3 ReconMarkerPoint(const VolumeField& f, const CameraIntrinsics& intr, const Pose& pose,
                             const Pixel& pixel) {
  Vec3 ray_cam = Undistort(intr, pixel).normalized();
  Vec3 dir = (pose.r * ray_cam).normalized();
  auto hit = RayMarch(f, pose.t, dir);
  if (!hit)
    throw Error(Errc::kRayMiss, "no surface along the ray through pixel (" + std::to_string(pixel.x()) + ", " +
                                    std::to_string(pixel.y()) + ")");
  return Apply(Invert(pose), hit->point);
}

struct ScalePair {
  int frame_id = 0;
  Vec3 metric;  // P_X, meters
  Vec3 recon;   // P_X in reconstruction units
};

struct ScaleEstimate {
  std::vector<std::pair<int, double>> per_frame;
  double mean_scale = 1.0;
};

/// Per-frame ratio ||metric|| / ||recon||, averaged arithmetically in input
/// order.
inline ScaleEstimate EstimateScale(std::span<const ScalePair> pairs) {
  if (pairs.empty()) throw Error(Errc::kEmptyInput, "no marker point pairs");
  ScaleEstimate est;
  double sum = 0.0;
  for (const auto& p : pairs) {
    const double rn = p.recon.norm();
    if (!(rn > 1e-12))
      throw Error(Errc::kDegenerateReconPoint,
                  "frame " + std::to_string(p.frame_id) + ": reconstruction point at the camera center");
    const double s = p.metric.norm() / rn;
    if (!(s > 0.0)) throw Error(Errc::kDegenerateReconPoint, "frame " + std::to_string(p.frame_id) + ": zero scale");
    est.per_frame.emplace_back(p.frame_id, s);
    sum += s;
  }
  est.mean_scale = sum / static_cast<double>(pairs.size());
  return est;
}

/// Uniformly scales vertex positions about the origin.
inline TriangleMesh ApplyScale(TriangleMesh mesh, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw Error(Errc::kNonPositiveScale, "scale must be positive and finite");
  for (auto& v : mesh.vertices) v *= s;
  return mesh;
}

/// Scale from one marker observation: solve the board, pick the anchor's
/// reprojection (or `pixel_override`), and cast it into the field.
inline ScalePair MeasureFrame(const MarkerObservation& obs, const CameraIntrinsics& intr, const VolumeField& f,
                              const Pose& recon_pose, std::optional<Pixel> pixel_override = std::nullopt) {
  MetricMarkerPoint metric = SolveMetricMarkerPoint(obs, intr);
  if (!pixel_override) pixel_override = obs.anchor_pixel;
  Pixel px = pixel_override ? *pixel_override : Project(intr, metric.point);
  Vec3 recon;
  try {
    recon = ReconMarkerPoint(f, intr, recon_pose, px);
  } catch (const Error& e) {
    if (e.code() == Errc::kRayMiss)
      throw Error(Errc::kRayMiss, "frame " + std::to_string(obs.frame_id) + ": marker ray misses the surface");
    throw;
  }
  return {obs.frame_id, metric.point, recon};
}

}  // namespace meshforge
