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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meshforge/error.hpp"
#include "meshforge/geometry.hpp"
#include "meshforge/kdtree.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge {

/// Operator-picked matching points between two fragments.
struct CorrespondenceSet {
  std::string source_id;
  std::string target_id;
  std::vector<std::pair<Vec3, Vec3>> pairs;  // (src, dst)
};

/// x -> scale * r * x + t
struct Similarity {
  Pose pose;
  double scale = 1.0;

  Vec3 operator()(const Vec3& x) const { return scale * (pose.r * x) + pose.t; }
};

struct AlignmentFit {
  Similarity transform;
  Vec3 singular_values = Vec3::Zero();  // of the cross-covariance
};

/// Closed-form least-squares similarity (or rigid) fit minimizing
/// sum |s R src + t - dst|^2. The cross-covariance SVD is sign-corrected so
/// that R is always a proper rotation.
inline AlignmentFit FitSimilarity(std::span<const Vec3> src, std::span<const Vec3> dst, bool with_scale) {
  const size_t n = src.size();
  if (n != dst.size()) throw Error(Errc::kInvalidArgument, "point lists differ in length");
  if (n < 3) throw Error(Errc::kInsufficientPairs, "alignment needs at least 3 pairs, got " + std::to_string(n));
  Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
  for (size_t i = 0; i < n; ++i) {
    ms += src[i];
    md += dst[i];
  }
  ms /= static_cast<double>(n);
  md /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero(), spread = Mat3::Zero();
  double var_s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    Vec3 a = src[i] - ms, b = dst[i] - md;
    cov += b * a.transpose();
    spread += a * a.transpose();
    var_s += a.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_s /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Mat3> spread_eig(spread);
  const Vec3 ev = spread_eig.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2))
    throw Error(Errc::kDegenerateConfiguration, "source points are collinear");

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) fix(2, 2) = -1.0;
  AlignmentFit fit;
  fit.singular_values = svd.singularValues();
  Mat3 r = svd.matrixU() * fix * svd.matrixV().transpose();
  double s = 1.0;
  if (with_scale) s = (svd.singularValues().asDiagonal() * fix).trace() / var_s;
  if (!(s > 0.0)) throw Error(Errc::kDegenerateConfiguration, "non-positive scale estimate");
  fit.transform = {Pose{r, md - s * (r * ms)}, s};
  return fit;
}

/// Coarse registration from point correspondences.
inline Similarity AlignCorrespondences(const CorrespondenceSet& c, bool with_scale) {
  if (c.pairs.size() < 3)
    throw Error(Errc::kInsufficientPairs, "coarse registration needs at least three matching points, got " +
                                              std::to_string(c.pairs.size()));
  std::vector<Vec3> src, dst;
  for (const auto& [a, b] : c.pairs) {
    if (!IsFinite(a) || !IsFinite(b)) throw Error(Errc::kInvalidArgument, "non-finite correspondence");
    src.push_back(a);
    dst.push_back(b);
  }
  return FitSimilarity(src, dst, with_scale).transform;
}

struct IcpParams {
  int max_iterations = 50;
  double max_correspondence_distance = 0.05;
  double rel_rmse_tolerance = 1e-6;
  int sample_count = 0;  // 0 = every source point
  /// Keep a pair only when the source point is also the target point's
  /// nearest neighbour among the moved source points. Drops the pairs that
  /// drag one fragment toward the other's rim when they overlap partially.
  bool reciprocal = false;

  void Validate() const {
    if (max_iterations < 1) throw Error(Errc::kInvalidArgument, "max_iterations must be >= 1");
    if (!(max_correspondence_distance > 0.0) || !(rel_rmse_tolerance > 0.0))
      throw Error(Errc::kInvalidArgument, "ICP distances and tolerances must be positive");
    if (sample_count < 0) throw Error(Errc::kInvalidArgument, "sample_count must be >= 0");
  }
};

inline constexpr double kLowConditionThreshold = 1e-6;

struct RigidResult {
  Pose pose;
  double rmse = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Matching RMSE at the start of each iteration.
  std::vector<double> rmse_trace;
  size_t matched = 0;
  /// smallest / largest singular value of the last cross-covariance.
  double condition = 1.0;
  bool low_conditioned = false;
};

/// Deterministic stratified subsample: m indices spread evenly over [0, n).
inline std::vector<uint32_t> StratifiedSample(size_t n, int m) {
  std::vector<uint32_t> idx;
  if (m <= 0 || static_cast<size_t>(m) >= n) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0u);
    return idx;
  }
  idx.reserve(m);
  for (int k = 0; k < m; ++k) idx.push_back(static_cast<uint32_t>((static_cast<uint64_t>(k) * n) / m));
  return idx;
}

/// Point-to-point ICP: nearest neighbours in a k-d tree over `target`,
/// pairs farther than max_correspondence_distance dropped, closed-form rigid
/// update, repeated until the relative RMSE change falls below the tolerance
/// (converged) or max_iterations is reached. `pose` maps source into target.
inline RigidResult Icp(std::span<const Vec3> source, std::span<const Vec3> target, const Pose& init,
                       const IcpParams& params) {
  params.Validate();
  if (source.empty() || target.empty()) throw Error(Errc::kEmptyCloud, "ICP needs non-empty clouds");
  const KdTree tree(target);
  const std::vector<uint32_t> sample = StratifiedSample(source.size(), params.sample_count);
  const double max_d2 = params.max_correspondence_distance * params.max_correspondence_distance;

  std::vector<Vec3> all_moved, moved, matched;
  auto match = [&](const Pose& pose) {
    all_moved.clear();
    moved.clear();
    matched.clear();
    for (uint32_t i : sample) all_moved.push_back(Apply(pose, source[i]));
    std::optional<KdTree> back;
    if (params.reciprocal) back.emplace(all_moved);
    double sse = 0.0;
    for (const Vec3& p : all_moved) {
      KdTree::Hit h = tree.Nearest(p);
      if (h.distance2 > max_d2) continue;
      const Vec3& q = tree.point(h.index);
      if (back && back->Nearest(q).distance2 < h.distance2) continue;
      moved.push_back(p);
      matched.push_back(q);
      sse += h.distance2;
    }
    return matched.empty() ? 0.0 : std::sqrt(sse / static_cast<double>(matched.size()));
  };

  RigidResult out;
  out.pose = init;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= params.max_iterations; ++it) {
    const double rmse = match(out.pose);
    if (matched.empty())
      throw Error(Errc::kNoCorrespondences,
                  "ICP iteration " + std::to_string(it) + ": every match exceeds max_correspondence_distance");
    out.rmse_trace.push_back(rmse);
    out.iterations = it;
    if (rmse <= 1e-12 || (std::isfinite(prev) && std::abs(prev - rmse) <= params.rel_rmse_tolerance * prev)) {
      out.converged = true;
      break;
    }
    prev = rmse;
    if (matched.size() < 3) break;
    AlignmentFit fit = FitSimilarity(moved, matched, false);
    const Vec3& sv = fit.singular_values;
    out.condition = sv(0) > 0.0 ? sv(2) / sv(0) : 0.0;
    out.pose = Compose(fit.transform.pose, out.pose);
  }
  out.rmse = match(out.pose);
  out.matched = matched.size();
  out.low_conditioned = out.condition < kLowConditionThreshold;
  return out;
}

struct RegistrationResult {
  Pose pose;  // source fragment frame -> target fragment frame
  Pose coarse;
  RigidResult icp;
  bool coarse_only = false;
  std::string diagnostics;
};

/// Rigid coarse alignment from the correspondences, refined by ICP over the
/// vertex clouds. If ICP finds no correspondences at all the coarse result is
/// returned and flagged.
inline RegistrationResult RegisterFragments(const TriangleMesh& src, const TriangleMesh& dst,
                                            const CorrespondenceSet& c, const IcpParams& params) {
  RegistrationResult out;
  out.coarse = AlignCorrespondences(c, false).pose;
  out.pose = out.coarse;
  try {
    out.icp = Icp(src.vertices, dst.vertices, out.coarse, params);
    out.pose = out.icp.pose;
    if (!out.icp.converged) out.diagnostics = "icp stopped at max_iterations without converging";
    if (out.icp.low_conditioned) {
      if (!out.diagnostics.empty()) out.diagnostics += "; ";
      out.diagnostics += "rotation is low-conditioned";
    }
  } catch (const Error& e) {
    if (e.code() != Errc::kNoCorrespondences) throw;
    out.coarse_only = true;
    out.diagnostics = std::string("coarse-only result: ") + e.what();
  }
  return out;
}

}  // namespace meshforge
