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
#include <numbers>
#include <vector>

#include "meshforge/kdtree.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge::testing {

/// Euclidean distance from `p` to triangle (a, b, c).
inline double PointTriangleDistance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0)
    return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

inline std::vector<Vec3> FibonacciSphere(const Vec3& center, double r, int n) {
  std::vector<Vec3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n, rho = std::sqrt(1.0 - z * z), t = golden * i;
    out.push_back(center + r * Vec3(rho * std::cos(t), rho * std::sin(t), z));
  }
  return out;
}

/// Symmetric Hausdorff distance between a mesh and a sphere, never
/// underestimated. Mesh to sphere is exact: over a triangle the distance to
/// the center peaks at a vertex and bottoms out at the point-triangle
/// distance. Sphere to mesh takes, for each sample, the faces around its
/// nearest vertex, which bounds the true distance from above.
inline double SphereHausdorff(const TriangleMesh& m, const Vec3& center, double r, int samples = 4000) {
  double worst = 0.0;
  for (const auto& f : m.faces) {
    const Vec3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];
    const double far = std::max({(a - center).norm(), (b - center).norm(), (c - center).norm()});
    worst = std::max({worst, far - r, r - PointTriangleDistance(center, a, b, c)});
  }
  std::vector<std::vector<uint32_t>> incident(m.vertices.size());
  for (uint32_t f = 0; f < m.faces.size(); ++f)
    for (uint32_t v : m.faces[f]) incident[v].push_back(f);
  KdTree tree(m.vertices);
  for (const auto& p : FibonacciSphere(center, r, samples)) {
    const auto hit = tree.Nearest(p);
    double best = std::sqrt(hit.distance2);
    for (uint32_t f : incident[hit.index]) {
      const auto& face = m.faces[f];
      best = std::min(best, PointTriangleDistance(p, m.vertices[face[0]], m.vertices[face[1]], m.vertices[face[2]]));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace meshforge::testing
