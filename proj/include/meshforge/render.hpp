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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "meshforge/camera.hpp"
#include "meshforge/error.hpp"
#include "meshforge/field.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge {

/// Row-major RGB image, components in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  Image() = default;
  Image(int w, int h, const Rgb& fill = Rgb::Zero()) : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw Error(Errc::kInvalidArgument, "image size must be positive");
  }

  size_t size() const { return pixels.size(); }
  Rgb& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

inline constexpr double kNearClip = 1e-6;

struct RenderResult {
  Image image;
  /// Camera-space z per pixel; +infinity where nothing was drawn.
  std::vector<double> depth;

  bool covered(size_t i) const { return std::isfinite(depth[i]); }
  size_t covered_count() const {
    return static_cast<size_t>(std::count_if(depth.begin(), depth.end(), [](double d) { return std::isfinite(d); }));
  }
};

namespace detail {

// Inclusion rule for pixel centers exactly on an edge (top-left convention on
// a positively oriented triangle), so shared edges are drawn exactly once.
inline bool EdgeOwnsTies(const Vec2& a, const Vec2& b) {
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

inline double EdgeFn(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

}  // namespace detail

/// Point-in-triangle test used by the rasterizer, pixel centers at
/// (x + 0.5, y + 0.5). Returns barycentric weights when covered.
inline std::optional<Vec3> CoverBarycentric(Vec2 a, Vec2 b, Vec2 c, const Vec2& p) {
  double area = detail::EdgeFn(a, b, c);
  if (area == 0.0 || !std::isfinite(area)) return std::nullopt;
  if (area < 0.0) {
    std::swap(b, c);
    area = -area;
  }
  const double w0 = detail::EdgeFn(b, c, p), w1 = detail::EdgeFn(c, a, p), w2 = detail::EdgeFn(a, b, p);
  auto in = [](double w, const Vec2& e0, const Vec2& e1) {
    return w > 0.0 || (w == 0.0 && detail::EdgeOwnsTies(e0, e1));
  };
  if (!in(w0, b, c) || !in(w1, c, a) || !in(w2, a, b)) return std::nullopt;
  return Vec3(w0 / area, w1 / area, w2 / area);
}

/// Renders a vertex-colored mesh from a camera-to-world `pose`. Vertices go
/// through the full distortion model; triangles are filled with
/// perspective-correct color interpolation and a nearest-z depth test.
/// Triangles with a vertex at z <= 1e-6 are culled. Rows are split into
/// bands, each band walking every triangle in index order, so the result does
/// not depend on `threads`.
inline RenderResult Rasterize(const TriangleMesh& mesh, const CameraIntrinsics& intr, const Pose& pose,
                              const Rgb& background, int threads = 1) {
  if (!mesh.vertices.empty() && !mesh.has_colors())
    throw Error(Errc::kMissingColors, "rasterize needs per-vertex colors");
  const int w = intr.width, h = intr.height;
  RenderResult out{Image(w, h, background), std::vector<double>(static_cast<size_t>(w) * h,
                                                                std::numeric_limits<double>::infinity())};
  const Pose world_to_cam = Invert(pose);
  const size_t nv = mesh.vertices.size();
  std::vector<Vec2> screen(nv);
  std::vector<double> inv_z(nv, 0.0);
  for (size_t i = 0; i < nv; ++i) {
    Vec3 pc = Apply(world_to_cam, mesh.vertices[i]);
    if (pc.z() <= kNearClip) continue;
    screen[i] = Project(intr, pc);
    inv_z[i] = 1.0 / pc.z();
  }

  constexpr int kBand = 16;
  const int bands = (h + kBand - 1) / kBand;
  ParallelFor(bands, threads, [&](int band) {
    const int y_lo = band * kBand, y_hi = std::min(h, y_lo + kBand);
    for (const Face& f : mesh.faces) {
      if (inv_z[f[0]] == 0.0 || inv_z[f[1]] == 0.0 || inv_z[f[2]] == 0.0) continue;
      const Vec2 &a = screen[f[0]], &b = screen[f[1]], &c = screen[f[2]];
      const double min_x = std::min({a.x(), b.x(), c.x()}), max_x = std::max({a.x(), b.x(), c.x()});
      const double min_y = std::min({a.y(), b.y(), c.y()}), max_y = std::max({a.y(), b.y(), c.y()});
      if (!(max_x >= 0.0 && min_x <= w && max_y >= 0.0 && min_y <= h)) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x - 0.5)));
      const int y0 = std::max(y_lo, static_cast<int>(std::floor(min_y - 0.5)));
      const int y1 = std::min(y_hi - 1, static_cast<int>(std::ceil(max_y - 0.5)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          auto bary = CoverBarycentric(a, b, c, {x + 0.5, y + 0.5});
          if (!bary) continue;
          const Vec3& l = *bary;
          const double iz = l[0] * inv_z[f[0]] + l[1] * inv_z[f[1]] + l[2] * inv_z[f[2]];
          if (!(iz > 0.0)) continue;
          const double z = 1.0 / iz;
          const size_t idx = static_cast<size_t>(y) * w + x;
          if (!(z < out.depth[idx])) continue;
          out.depth[idx] = z;
          Rgb col = (l[0] * inv_z[f[0]]) * mesh.colors[f[0]] + (l[1] * inv_z[f[1]]) * mesh.colors[f[1]] +
                    (l[2] * inv_z[f[2]]) * mesh.colors[f[2]];
          out.image.pixels[idx] = (col / iz).cwiseMax(0.0).cwiseMin(1.0);
        }
    }
  });
  return out;
}

/// Ray-casts a field through every pixel center. `shade` maps (hit point,
/// unit view direction) to a color; by default the field's own color.
template <class Shade>
inline Image RayCastImage(const VolumeField& f, const CameraIntrinsics& intr, const Pose& pose, const Rgb& background,
                   Shade&& shade, int threads = 1) {
  Image img(intr.width, intr.height, background);
  ParallelFor(intr.height, threads, [&](int y) {
    for (int x = 0; x < intr.width; ++x) {
      Vec3 d = (pose.r * Undistort(intr, {x + 0.5, y + 0.5}).normalized()).normalized();
      if (auto hit = RayMarch(f, pose.t, d)) img.at(x, y) = shade(hit->point, d).cwiseMax(0.0).cwiseMin(1.0);
    }
  });
  return img;
}

inline Image RayCastImage(const VolumeField& f, const CameraIntrinsics& intr, const Pose& pose,
                          const Rgb& background, int threads = 1) {
  return RayCastImage(
      f, intr, pose, background, [&](const Vec3& p, const Vec3& d) { return f.Color(p, d); }, threads);
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  double psnr = 99.0;
  size_t pixel_count = 0;
};

inline constexpr double kPsnrCap = 99.0;

/// Unit-peak PSNR, capped at 99 dB once rmse < 1e-5.
inline double PsnrFromRmse(double rmse) { return rmse < 1e-5 ? kPsnrCap : -20.0 * std::log10(rmse); }

/// Per-channel errors averaged over the masked pixels (all pixels without a
/// mask).
inline MetricsReport Compare(const Image& rendered, const Image& reference,
                             std::span<const uint8_t> mask = {}, int threads = 1) {
  if (rendered.width != reference.width || rendered.height != reference.height)
    throw Error(Errc::kDimensionMismatch, "image sizes differ");
  if (!mask.empty() && mask.size() != rendered.size())
    throw Error(Errc::kDimensionMismatch, "mask size differs from image");
  const int rows = rendered.height;
  struct Partial {
    double abs = 0.0, sq = 0.0;
    size_t count = 0;
  };
  std::vector<Partial> partial(rows);
  ParallelFor(rows, threads, [&](int y) {
    Partial p;
    for (int x = 0; x < rendered.width; ++x) {
      const size_t i = static_cast<size_t>(y) * rendered.width + x;
      if (!mask.empty() && !mask[i]) continue;
      Rgb d = rendered.pixels[i] - reference.pixels[i];
      p.abs += d.cwiseAbs().sum();
      p.sq += d.squaredNorm();
      ++p.count;
    }
    partial[y] = p;
  });
  Partial total;
  for (const auto& p : partial) {
    total.abs += p.abs;
    total.sq += p.sq;
    total.count += p.count;
  }
  if (total.count == 0) throw Error(Errc::kEmptyMask, "mask selects no pixels");
  MetricsReport r;
  const double n = 3.0 * static_cast<double>(total.count);
  r.mae = total.abs / n;
  r.rmse = std::sqrt(total.sq / n);
  r.psnr = PsnrFromRmse(r.rmse);
  r.pixel_count = total.count;
  return r;
}

enum class MaskMode { kCovered, kFull };

struct EvalOptions {
  int frame_sample = 20;
  uint64_t seed = 0;
  MaskMode mask_mode = MaskMode::kCovered;
  /// Frames whose rendered mesh covers less than this fraction of the image
  /// are treated as out of frame and excluded.
  double min_coverage = 0.001;
  Rgb background = Rgb::Zero();
  int threads = 1;
};

struct EvalFrame {
  int frame_id = 0;
  Image image;
  Pose pose;  // camera-to-world
};

struct FrameMetrics {
  int frame_id = 0;
  MetricsReport metrics;
  double coverage = 0.0;
};

struct EvalReport {
  std::vector<FrameMetrics> per_frame;
  std::vector<int> excluded;
  MetricsReport aggregate;
};

/// Seeded sample of `k` distinct indices out of [0, n), ascending. Uses a
/// partial Fisher-Yates shuffle driven by mt19937_64 so the choice is the same
/// on every platform.
inline std::vector<size_t> SampleIndices(size_t n, size_t k, uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  if (k >= n) return idx;
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Renders the mesh at a seeded sample of frames and compares against each
/// reference image; aggregate mae/rmse are unweighted means over the kept
/// frames and psnr is recomputed from the mean rmse.
inline EvalReport EvaluateAgainstFrames(const TriangleMesh& mesh, std::span<const EvalFrame> frames,
                                        const CameraIntrinsics& intr, const EvalOptions& opt) {
  if (frames.empty()) throw Error(Errc::kEmptyInput, "no frames to evaluate");
  if (opt.frame_sample < 1) throw Error(Errc::kInvalidArgument, "frame_sample must be >= 1");
  EvalReport report;
  double mae = 0.0, rmse = 0.0;
  size_t pixels = 0;
  for (size_t i : SampleIndices(frames.size(), static_cast<size_t>(opt.frame_sample), opt.seed)) {
    const EvalFrame& fr = frames[i];
    RenderResult rr = Rasterize(mesh, intr, fr.pose, opt.background, opt.threads);
    const double coverage = static_cast<double>(rr.covered_count()) / static_cast<double>(rr.depth.size());
    if (coverage < opt.min_coverage || rr.covered_count() == 0) {
      report.excluded.push_back(fr.frame_id);
      continue;
    }
    std::vector<uint8_t> mask;
    if (opt.mask_mode == MaskMode::kCovered) {
      mask.resize(rr.depth.size());
      for (size_t p = 0; p < mask.size(); ++p) mask[p] = rr.covered(p) ? 1 : 0;
    }
    MetricsReport m = Compare(rr.image, fr.image, mask, opt.threads);
    report.per_frame.push_back({fr.frame_id, m, coverage});
    mae += m.mae;
    rmse += m.rmse;
    pixels += m.pixel_count;
  }
  if (report.per_frame.empty())
    throw Error(Errc::kAllFramesExcluded, "every sampled frame fell below the coverage threshold");
  const double n = static_cast<double>(report.per_frame.size());
  report.aggregate.mae = mae / n;
  report.aggregate.rmse = rmse / n;
  report.aggregate.psnr = PsnrFromRmse(report.aggregate.rmse);
  report.aggregate.pixel_count = pixels;
  return report;
}

}  // namespace meshforge
