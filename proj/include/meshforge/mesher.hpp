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

#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "meshforge/error.hpp"
#include "meshforge/field.hpp"
#include "meshforge/mc_tables.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge {

/// Lattice for isosurface extraction. `resolution` counts lattice nodes per
/// axis (x, y, z); cells per axis are resolution - 1.
struct MeshingConfig {
  std::array<int, 3> resolution{64, 64, 64};
  Aabb bbox{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  double iso = 0.0;
  double gradient_step = 1e-4;

  void Validate() const {
    for (int r : resolution)
      if (r < 2) throw Error(Errc::kInvalidArgument, "meshing resolution must be >= 2 per axis");
    if (bbox.degenerate()) throw Error(Errc::kInvalidArgument, "meshing bbox is degenerate");
    if (!(gradient_step > 0.0)) throw Error(Errc::kInvalidArgument, "gradient_step must be positive");
  }

  Vec3 cell() const {
    Vec3 e = bbox.extent();
    return {e.x() / (resolution[0] - 1), e.y() / (resolution[1] - 1), e.z() / (resolution[2] - 1)};
  }
  double cell_diagonal() const { return cell().norm(); }
};

namespace detail {

// Cube corner offsets and edge endpoints in the table's numbering.
inline constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                      {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
// Each cube edge as (base corner offset, axis).
inline constexpr int kEdge[12][4] = {{0, 0, 0, 0}, {1, 0, 0, 1}, {0, 1, 0, 0}, {0, 0, 0, 1},
                                     {0, 0, 1, 0}, {1, 0, 1, 1}, {0, 1, 1, 0}, {0, 0, 1, 1},
                                     {0, 0, 0, 2}, {1, 0, 0, 2}, {1, 1, 0, 2}, {0, 1, 0, 2}};

}  // namespace detail

/// Extracts the `cfg.iso` level set of `f` with marching cubes.
///
/// Vertices sit on lattice edges, linearly interpolated; each lattice edge
/// yields at most one vertex, so neighbouring cells share indices and meshes
/// of surfaces strictly inside the box are closed. Triangles wind so that
/// face normals point toward increasing scalar. Work is split into z-layers
/// that are concatenated in order; output does not depend on `threads`.
inline TriangleMesh MarchingCubes(const VolumeField& f, const MeshingConfig& cfg, int threads = 1) {
  cfg.Validate();
  const int nx = cfg.resolution[0], ny = cfg.resolution[1], nz = cfg.resolution[2];
  const size_t layer = static_cast<size_t>(nx) * ny;
  const Vec3 lo = cfg.bbox.min, ext = cfg.bbox.extent();
  auto coord = [&](int axis, int i) {
    return lo[axis] + ext[axis] * i / (cfg.resolution[axis] - 1);
  };
  auto node = [&](int i, int j, int k) { return static_cast<size_t>(i) + nx * (static_cast<size_t>(j) + static_cast<size_t>(ny) * k); };

  std::vector<double> values(layer * nz);
  ParallelFor(nz, threads, [&](int k) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        values[node(i, j, k)] = f.Scalar({coord(0, i), coord(1, j), coord(2, k)});
  });
  auto inside = [&](size_t idx) { return values[idx] < cfg.iso; };

  // Pass 1: one vertex per sign-changing lattice edge, grouped by the z-layer
  // of the edge's base node. edge_vertex holds the layer-local index.
  std::vector<int32_t> edge_vertex(layer * nz * 3, -1);
  std::vector<std::vector<Vec3>> layer_vertices(nz);
  ParallelFor(nz, threads, [&](int k) {
    auto& out = layer_vertices[k];
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const size_t a = node(i, j, k);
        const int step[3] = {1, nx, static_cast<int>(layer)};
        const int lim[3] = {i + 1 < nx, j + 1 < ny, k + 1 < nz};
        for (int axis = 0; axis < 3; ++axis) {
          if (!lim[axis]) continue;
          const size_t b = a + step[axis];
          if (inside(a) == inside(b)) continue;
          const double t = (cfg.iso - values[a]) / (values[b] - values[a]);
          Vec3 p(coord(0, i), coord(1, j), coord(2, k));
          const int idx[3] = {i, j, k};
          const double ca = coord(axis, idx[axis]), cb = coord(axis, idx[axis] + 1);
          p[axis] = ca + t * (cb - ca);
          edge_vertex[a * 3 + axis] = static_cast<int32_t>(out.size());
          out.push_back(p);
        }
      }
  });
  std::vector<uint32_t> offset(nz + 1, 0);
  for (int k = 0; k < nz; ++k) offset[k + 1] = offset[k] + static_cast<uint32_t>(layer_vertices[k].size());

  // Pass 2: triangles per cell layer.
  std::vector<std::vector<Face>> layer_faces(nz - 1);
  ParallelFor(nz - 1, threads, [&](int k) {
    auto& out = layer_faces[k];
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (inside(node(i + detail::kCorner[c][0], j + detail::kCorner[c][1], k + detail::kCorner[c][2])))
            cube |= 1 << c;
        if (cube == 0 || cube == 255) continue;
        auto vertex_of = [&](int e) {
          const auto& d = detail::kEdge[e];
          const int kk = k + d[2];
          const size_t base = node(i + d[0], j + d[1], kk);
          return offset[kk] + static_cast<uint32_t>(edge_vertex[base * 3 + d[3]]);
        };
        const int8_t* row = detail::kTriTable[cube];
        for (int t = 0; row[t] != -1; t += 3) {
          // The table winds toward the inside; swap to face outward.
          Face face{vertex_of(row[t]), vertex_of(row[t + 2]), vertex_of(row[t + 1])};
          if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) continue;
          out.push_back(face);
        }
      }
  });

  TriangleMesh mesh;
  mesh.vertices.reserve(offset[nz]);
  for (auto& lv : layer_vertices) mesh.vertices.insert(mesh.vertices.end(), lv.begin(), lv.end());
  for (auto& lf : layer_faces) mesh.faces.insert(mesh.faces.end(), lf.begin(), lf.end());
  return mesh;
}

/// Per-vertex normals from the normalized field gradient (central differences
/// with `step`). Where the gradient vanishes (|g| < 1e-12) the area-weighted
/// average of incident face normals is used instead.
inline TriangleMesh VertexNormals(TriangleMesh mesh, const VolumeField& f, double step, int threads = 1) {
  const size_t n = mesh.vertices.size();
  mesh.normals.assign(n, Vec3::Zero());
  std::vector<char> fallback(n, 0);
  constexpr int kChunk = 4096;
  ParallelFor(static_cast<int>((n + kChunk - 1) / kChunk), threads, [&](int c) {
    const size_t end = std::min(n, static_cast<size_t>(c + 1) * kChunk);
    for (size_t i = static_cast<size_t>(c) * kChunk; i < end; ++i) {
      Vec3 g = Gradient(f, mesh.vertices[i], step);
      double len = g.norm();
      if (len < 1e-12 || !std::isfinite(len))
        fallback[i] = 1;
      else
        mesh.normals[i] = g / len;
    }
  });
  bool any = false;
  for (char c : fallback) any = any || c;
  if (any) {
    std::vector<Vec3> acc(n, Vec3::Zero());
    for (const auto& face : mesh.faces) {
      Vec3 fn = FaceNormal(mesh, face);  // length = 2 * area
      for (uint32_t v : face) acc[v] += fn;
    }
    for (size_t i = 0; i < n; ++i) {
      if (!fallback[i]) continue;
      double len = acc[i].norm();
      mesh.normals[i] = len > 0.0 ? Vec3(acc[i] / len) : Vec3(Vec3::UnitZ());
    }
  }
  return mesh;
}

/// Direction used to query vertex colors from the field.
struct ColorMode {
  enum class Kind { kOppositeNormal, kCameraDirection };
  Kind kind = Kind::kOppositeNormal;
  Pose camera;  // camera-to-world; only used by kCameraDirection

  static ColorMode OppositeNormal() { return {}; }
  static ColorMode CameraDirection(const Pose& camera_to_world) {
    return {Kind::kCameraDirection, camera_to_world};
  }
};

/// Queries the field color at each vertex. Opposite-normal mode looks along
/// -n, i.e. from directly outside the surface; camera-direction mode looks
/// along the ray from one fixed camera center to the vertex.
inline TriangleMesh Colorize(TriangleMesh mesh, const VolumeField& f, const ColorMode& mode, int threads = 1) {
  if (!mesh.has_normals() && !mesh.vertices.empty())
    throw Error(Errc::kMissingNormals, "colorize needs per-vertex normals");
  const size_t n = mesh.vertices.size();
  mesh.colors.assign(n, Rgb::Zero());
  constexpr int kChunk = 4096;
  ParallelFor(static_cast<int>((n + kChunk - 1) / kChunk), threads, [&](int c) {
    const size_t end = std::min(n, static_cast<size_t>(c + 1) * kChunk);
    for (size_t i = static_cast<size_t>(c) * kChunk; i < end; ++i) {
      const Vec3& v = mesh.vertices[i];
      Vec3 dir;
      if (mode.kind == ColorMode::Kind::kOppositeNormal) {
        dir = -mesh.normals[i];
      } else {
        dir = v - mode.camera.t;
        double len = dir.norm();
        dir = len > 0.0 ? Vec3(dir / len) : Vec3(-mesh.normals[i]);
      }
      mesh.colors[i] = f.Color(v, dir).cwiseMax(0.0).cwiseMin(1.0);
    }
  });
  return mesh;
}

/// Vertex clustering on a uniform grid anchored at the mesh's bbox minimum.
/// Each occupied cell collapses to the mean of its vertices (colors averaged,
/// normals averaged and renormalized); faces that collapse or duplicate an
/// earlier face are dropped. Cluster order follows first occurrence.
inline TriangleMesh Decimate(const TriangleMesh& mesh, double cell_size) {
  if (!(cell_size > 0.0)) throw Error(Errc::kInvalidArgument, "cell_size must be positive");
  if (mesh.vertices.empty()) return mesh;
  const Aabb bounds = mesh.Bounds();
  const Vec3 origin = bounds.min;
  // The last cell on each axis is closed so that cell_size >= extent keeps a
  // single cell even when a vertex lies exactly on the far face.
  std::array<int64_t, 3> last;
  for (int a = 0; a < 3; ++a)
    last[a] = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(bounds.extent()[a] / cell_size)) - 1);
  struct KeyHash {
    size_t operator()(const std::array<int64_t, 3>& k) const {
      uint64_t h = 1469598103934665603ull;
      for (int64_t v : k) h = (h ^ static_cast<uint64_t>(v)) * 1099511628211ull;
      return static_cast<size_t>(h);
    }
  };
  std::unordered_map<std::array<int64_t, 3>, uint32_t, KeyHash> cell_of;
  std::vector<uint32_t> remap(mesh.vertices.size());
  std::vector<int> members;
  TriangleMesh out;
  const bool normals = mesh.has_normals(), colors = mesh.has_colors();
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    Vec3 q = (mesh.vertices[i] - origin) / cell_size;
    std::array<int64_t, 3> key;
    for (int a = 0; a < 3; ++a) key[a] = std::min(last[a], static_cast<int64_t>(std::floor(q[a])));
    auto [it, fresh] = cell_of.try_emplace(key, static_cast<uint32_t>(out.vertices.size()));
    if (fresh) {
      out.vertices.push_back(Vec3::Zero());
      if (normals) out.normals.push_back(Vec3::Zero());
      if (colors) out.colors.push_back(Rgb::Zero());
      members.push_back(0);
    }
    const uint32_t c = it->second;
    remap[i] = c;
    out.vertices[c] += mesh.vertices[i];
    if (normals) out.normals[c] += mesh.normals[i];
    if (colors) out.colors[c] += mesh.colors[i];
    ++members[c];
  }
  for (size_t c = 0; c < out.vertices.size(); ++c) {
    out.vertices[c] /= members[c];
    if (colors) out.colors[c] /= members[c];
    if (normals) {
      double len = out.normals[c].norm();
      out.normals[c] = len > 1e-12 ? Vec3(out.normals[c] / len) : Vec3(Vec3::UnitZ());
    }
  }
  struct FaceHash {
    size_t operator()(const Face& f) const {
      return (static_cast<size_t>(f[0]) * 73856093u) ^ (static_cast<size_t>(f[1]) * 19349663u) ^
             (static_cast<size_t>(f[2]) * 83492791u);
    }
  };
  std::unordered_map<Face, bool, FaceHash> seen;
  for (const auto& f : mesh.faces) {
    Face g{remap[f[0]], remap[f[1]], remap[f[2]]};
    if (g[0] == g[1] || g[1] == g[2] || g[0] == g[2]) continue;
    Face key = g;
    std::sort(key.begin(), key.end());
    if (!seen.emplace(key, true).second) continue;
    out.faces.push_back(g);
  }
  return out;
}

}  // namespace meshforge
