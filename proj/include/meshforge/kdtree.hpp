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
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "meshforge/geometry.hpp"

namespace meshforge {

/// Static 3D k-d tree for nearest-neighbour queries. Splits on the axis of
/// largest spread at the median; leaves hold up to 8 points.
class KdTree {
 public:
  struct Hit {
    uint32_t index = std::numeric_limits<uint32_t>::max();
    double distance2 = std::numeric_limits<double>::infinity();
  };

  explicit KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      Build(0, static_cast<uint32_t>(points_.size()));
    }
  }

  size_t size() const { return points_.size(); }
  const Vec3& point(uint32_t i) const { return points_[i]; }

  Hit Nearest(const Vec3& q) const {
    Hit best;
    if (!nodes_.empty()) Search(0, q, best);
    return best;
  }

 private:
  static constexpr uint32_t kLeafSize = 8;

  struct Node {
    uint32_t begin, end;       // range in order_
    int axis = -1;             // -1 for leaves
    double split = 0.0;
    uint32_t left = 0, right = 0;
  };

  uint32_t Build(uint32_t begin, uint32_t end) {
    const uint32_t id = static_cast<uint32_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;
    Aabb box;
    for (uint32_t i = begin; i < end; ++i) box.Extend(points_[order_[i]]);
    int axis;
    box.extent().maxCoeff(&axis);
    const uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](uint32_t a, uint32_t b) {
                       double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const uint32_t left = Build(begin, mid);
    const uint32_t right = Build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void Search(uint32_t id, const Vec3& q, Hit& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (uint32_t i = n.begin; i < n.end; ++i) {
        const uint32_t idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 < best.distance2 || (d2 == best.distance2 && idx < best.index)) best = {idx, d2};
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const uint32_t near = diff < 0.0 ? n.left : n.right;
    const uint32_t far = diff < 0.0 ? n.right : n.left;
    Search(near, q, best);
    if (diff * diff <= best.distance2) Search(far, q, best);
  }

  std::vector<Vec3> points_;
  std::vector<uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace meshforge
