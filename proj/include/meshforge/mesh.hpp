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
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meshforge/error.hpp"
#include "meshforge/geometry.hpp"

namespace meshforge {

using Face = std::array<uint32_t, 3>;

/// Indexed triangle mesh with optional per-vertex normals and colors. Edges
/// are implied by faces and never stored.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> normals;  // empty or one per vertex
  std::vector<Rgb> colors;    // empty or one per vertex

  bool empty() const { return vertices.empty(); }
  bool has_normals() const { return !vertices.empty() && normals.size() == vertices.size(); }
  bool has_colors() const { return !vertices.empty() && colors.size() == vertices.size(); }

  Aabb Bounds() const {
    Aabb b;
    for (const auto& v : vertices) b.Extend(v);
    return b;
  }

  void Validate() const {
    const size_t n = vertices.size();
    for (const auto& f : faces) {
      if (f[0] >= n || f[1] >= n || f[2] >= n)
        throw Error(Errc::kInvalidArgument, "face index out of range");
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
        throw Error(Errc::kInvalidArgument, "degenerate face");
    }
    if (!normals.empty() && normals.size() != n)
      throw Error(Errc::kInvalidArgument, "normal count does not match vertices");
    if (!colors.empty() && colors.size() != n)
      throw Error(Errc::kInvalidArgument, "color count does not match vertices");
    for (const auto& nn : normals)
      if (std::abs(nn.norm() - 1.0) > 1e-6) throw Error(Errc::kInvalidArgument, "normal not unit length");
    for (const auto& c : colors)
      if ((c.array() < 0.0).any() || (c.array() > 1.0).any())
        throw Error(Errc::kInvalidArgument, "color outside [0, 1]");
  }
};

inline Vec3 FaceNormal(const TriangleMesh& m, const Face& f) {
  return (m.vertices[f[1]] - m.vertices[f[0]]).cross(m.vertices[f[2]] - m.vertices[f[0]]);
}

/// Signed volume by the divergence theorem; positive for outward winding.
inline double EnclosedVolume(const TriangleMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces)
    v += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]]));
  return v / 6.0;
}

struct EdgeReport {
  size_t edges = 0;
  size_t boundary = 0;      // used by one face
  size_t non_manifold = 0;  // used by more than two faces
  bool closed() const { return edges > 0 && boundary == 0 && non_manifold == 0; }
};

inline EdgeReport CheckEdges(const TriangleMesh& m) {
  std::map<std::pair<uint32_t, uint32_t>, int> uses;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) {
      uint32_t a = f[e], b = f[(e + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  EdgeReport r;
  r.edges = uses.size();
  for (const auto& [edge, n] : uses) {
    if (n == 1) ++r.boundary;
    if (n > 2) ++r.non_manifold;
  }
  return r;
}

/// Vertex indices that lie on a boundary edge.
inline std::vector<bool> BoundaryVertices(const TriangleMesh& m) {
  std::map<std::pair<uint32_t, uint32_t>, int> uses;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) {
      uint32_t a = f[e], b = f[(e + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  std::vector<bool> out(m.vertices.size(), false);
  for (const auto& [edge, n] : uses)
    if (n == 1) out[edge.first] = out[edge.second] = true;
  return out;
}

}  // namespace meshforge
