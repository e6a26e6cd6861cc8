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
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "meshforge/error.hpp"
#include "meshforge/geometry.hpp"

namespace meshforge {

/// A queryable implicit surface with view-conditioned color: the stand-in for
/// a trained neural field. Level-set convention is SDF-like: negative inside,
/// zero on the surface. Implementations are immutable and thread-safe.
class VolumeField {
 public:
  virtual ~VolumeField() = default;

  virtual double Scalar(const Vec3& p) const = 0;
  /// Color seen along unit direction `dir` at `p`, components in [0, 1].
  virtual Rgb Color(const Vec3& p, const Vec3& dir) const = 0;
  virtual Aabb Bounds() const = 0;
  /// True when |Scalar(a) - Scalar(b)| <= |a - b| everywhere, which makes
  /// sphere tracing safe.
  virtual bool IsLipschitz() const { return false; }
  /// Step used when marching without a Lipschitz bound.
  virtual double MarchStep() const { return Bounds().diagonal() / 512.0; }
};

using FieldPtr = std::shared_ptr<const VolumeField>;

/// Central differences with step h on each axis. Divides by the separation
/// of the rounded sample points, so affine fields come out exact.
inline Vec3 Gradient(const VolumeField& f, const Vec3& p, double h) {
  if (!(h > 0.0)) throw Error(Errc::kInvalidArgument, "gradient step must be positive");
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 hi = p, lo = p;
    hi[a] += h;
    lo[a] -= h;
    g[a] = (f.Scalar(hi) - f.Scalar(lo)) / (hi[a] - lo[a]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Analytic CSG fields

struct SpherePrim {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};
struct BoxPrim {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
};
/// Capped cylinder around `axis` through `center`.
struct CylinderPrim {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double radius = 1.0;
  double half_height = 1.0;
};
/// Torus in the plane z = center.z.
struct TorusPrim {
  Vec3 center = Vec3::Zero();
  double major = 1.0;
  double minor = 0.25;
};

enum class CsgOp { kUnion, kIntersection, kDifference };

struct ShapeNode;

/// Immutable CSG tree handle with value semantics (children are shared).
class Shape {
 public:
  static Shape Sphere(const Vec3& center, double radius);
  static Shape Box(const Vec3& center, const Vec3& half_extents);
  static Shape Cylinder(const Vec3& center, const Vec3& axis, double radius,
                        double half_height);
  static Shape Torus(const Vec3& center, double major, double minor);
  static Shape Combine(CsgOp op, Shape a, Shape b);

  double Distance(const Vec3& p) const;
  Aabb Bounds() const;
  const ShapeNode& node() const { return *node_; }

 private:
  explicit Shape(std::shared_ptr<const ShapeNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const ShapeNode> node_;
};

struct CsgNode {
  CsgOp op;
  Shape a;
  Shape b;
};

struct ShapeNode {
  std::variant<SpherePrim, BoxPrim, CylinderPrim, TorusPrim, CsgNode> v;
};

inline Shape operator|(Shape a, Shape b) { return Shape::Combine(CsgOp::kUnion, std::move(a), std::move(b)); }
inline Shape operator&(Shape a, Shape b) { return Shape::Combine(CsgOp::kIntersection, std::move(a), std::move(b)); }
inline Shape operator-(Shape a, Shape b) { return Shape::Combine(CsgOp::kDifference, std::move(a), std::move(b)); }

inline Shape Shape::Sphere(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw Error(Errc::kInvalidArgument, "sphere radius must be positive");
  return Shape(std::make_shared<ShapeNode>(ShapeNode{SpherePrim{center, radius}}));
}

inline Shape Shape::Box(const Vec3& center, const Vec3& half_extents) {
  if (!(half_extents.array() > 0.0).all())
    throw Error(Errc::kInvalidArgument, "box half extents must be positive");
  return Shape(std::make_shared<ShapeNode>(ShapeNode{BoxPrim{center, half_extents}}));
}

inline Shape Shape::Cylinder(const Vec3& center, const Vec3& axis, double radius,
                             double half_height) {
  if (!(radius > 0.0 && half_height > 0.0) || !(axis.norm() > 0.0))
    throw Error(Errc::kInvalidArgument, "cylinder dimensions must be positive");
  return Shape(std::make_shared<ShapeNode>(
      ShapeNode{CylinderPrim{center, axis.normalized(), radius, half_height}}));
}

inline Shape Shape::Torus(const Vec3& center, double major, double minor) {
  if (!(major > 0.0 && minor > 0.0))
    throw Error(Errc::kInvalidArgument, "torus radii must be positive");
  return Shape(std::make_shared<ShapeNode>(ShapeNode{TorusPrim{center, major, minor}}));
}

inline Shape Shape::Combine(CsgOp op, Shape a, Shape b) {
  return Shape(std::make_shared<ShapeNode>(ShapeNode{CsgNode{op, std::move(a), std::move(b)}}));
}

namespace detail {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace detail

inline double Shape::Distance(const Vec3& p) const {
  return std::visit(
      detail::Overloaded{
          [&](const SpherePrim& s) { return (p - s.center).norm() - s.radius; },
          [&](const BoxPrim& b) {
            Vec3 q = (p - b.center).cwiseAbs() - b.half_extents;
            return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
          },
          [&](const CylinderPrim& c) {
            Vec3 d = p - c.center;
            double along = d.dot(c.axis);
            double radial = (d - along * c.axis).norm();
            Vec2 q(radial - c.radius, std::abs(along) - c.half_height);
            return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
          },
          [&](const TorusPrim& t) {
            Vec3 d = p - t.center;
            Vec2 q(std::hypot(d.x(), d.y()) - t.major, d.z());
            return q.norm() - t.minor;
          },
          [&](const CsgNode& n) {
            double a = n.a.Distance(p), b = n.b.Distance(p);
            switch (n.op) {
              case CsgOp::kUnion: return std::min(a, b);
              case CsgOp::kIntersection: return std::max(a, b);
              case CsgOp::kDifference: return std::max(a, -b);
            }
            return a;
          }},
      node_->v);
}

inline Aabb Shape::Bounds() const {
  return std::visit(
      detail::Overloaded{
          [](const SpherePrim& s) {
            return Aabb(s.center - Vec3::Constant(s.radius), s.center + Vec3::Constant(s.radius));
          },
          [](const BoxPrim& b) { return Aabb(b.center - b.half_extents, b.center + b.half_extents); },
          [](const CylinderPrim& c) {
            Vec3 disc = (Vec3::Ones() - c.axis.cwiseProduct(c.axis)).cwiseMax(0.0).cwiseSqrt() * c.radius;
            Vec3 e0 = c.center - c.half_height * c.axis, e1 = c.center + c.half_height * c.axis;
            return Aabb(e0.cwiseMin(e1) - disc, e0.cwiseMax(e1) + disc);
          },
          [](const TorusPrim& t) {
            Vec3 r(t.major + t.minor, t.major + t.minor, t.minor);
            return Aabb(t.center - r, t.center + r);
          },
          [](const CsgNode& n) {
            Aabb a = n.a.Bounds(), b = n.b.Bounds();
            switch (n.op) {
              case CsgOp::kUnion: a.Extend(b); return a;
              case CsgOp::kIntersection: return Aabb(a.min.cwiseMax(b.min), a.max.cwiseMin(b.max));
              case CsgOp::kDifference: return a;
            }
            return a;
          }},
      node_->v);
}

struct ConstantTexture {
  Rgb color = Rgb::Constant(0.5);
};
/// 3D checkerboard with cubes of side `period`.
struct CheckerTexture {
  Rgb a = Rgb::Zero();
  Rgb b = Rgb::Ones();
  double period = 0.1;
};
/// Linear blend from `a` to `b` along `axis` across the shape's extent.
struct GradientTexture {
  Rgb a = Rgb::Zero();
  Rgb b = Rgb::Ones();
  Vec3 axis = Vec3::UnitZ();
};
using Texture = std::variant<ConstantTexture, CheckerTexture, GradientTexture>;

/// Closed-form CSG surface with a procedural texture and a view-dependence
/// knob: the emitted color is albedo * (1 - g + g * max(0, -dir . n)), with
/// g = view_gain and n the outward unit normal. g = 0 is purely diffuse; g = 1
/// reproduces the albedo only when queried along the inward normal.
class AnalyticField final : public VolumeField {
 public:
  AnalyticField(Shape shape, Texture texture, double view_gain = 0.0)
      : shape_(std::move(shape)), texture_(std::move(texture)), view_gain_(view_gain) {
    if (!(view_gain_ >= 0.0 && view_gain_ <= 1.0))
      throw Error(Errc::kInvalidArgument, "view_gain must lie in [0, 1]");
    if (const auto* c = std::get_if<CheckerTexture>(&texture_); c && !(c->period > 0.0))
      throw Error(Errc::kInvalidArgument, "checker period must be positive");
    Aabb sb = shape_.Bounds();
    if (sb.degenerate()) throw Error(Errc::kInvalidArgument, "shape has empty bounds");
    bounds_ = sb.Padded(0.05 * sb.diagonal());
    if (auto* g = std::get_if<GradientTexture>(&texture_)) {
      if (!(g->axis.norm() > 0.0)) throw Error(Errc::kInvalidArgument, "gradient axis is zero");
      g->axis.normalize();
      grad_lo_ = std::numeric_limits<double>::infinity();
      grad_hi_ = -grad_lo_;
      for (int i = 0; i < 8; ++i) {
        double s = sb.Corner(i).dot(g->axis);
        grad_lo_ = std::min(grad_lo_, s);
        grad_hi_ = std::max(grad_hi_, s);
      }
    }
  }

  double Scalar(const Vec3& p) const override { return shape_.Distance(p); }

  Rgb Albedo(const Vec3& p) const {
    return std::visit(
        detail::Overloaded{
            [](const ConstantTexture& t) { return t.color; },
            [&](const CheckerTexture& t) {
              long long k = static_cast<long long>(std::floor(p.x() / t.period)) +
                            static_cast<long long>(std::floor(p.y() / t.period)) +
                            static_cast<long long>(std::floor(p.z() / t.period));
              return (k & 1) ? t.b : t.a;
            },
            [&](const GradientTexture& t) {
              double span = grad_hi_ - grad_lo_;
              double s = span > 0.0 ? std::clamp((p.dot(t.axis) - grad_lo_) / span, 0.0, 1.0) : 0.0;
              return Rgb((1.0 - s) * t.a + s * t.b);
            }},
        texture_);
  }

  /// Outward unit normal from the SDF gradient.
  Vec3 Normal(const Vec3& p) const {
    Vec3 g = Gradient(*this, p, 1e-6 * bounds_.diagonal());
    double n = g.norm();
    return n > 0.0 ? Vec3(g / n) : Vec3::UnitZ();
  }

  Rgb Color(const Vec3& p, const Vec3& dir) const override {
    Rgb albedo = Albedo(p);
    if (view_gain_ == 0.0) return albedo;
    double facing = std::max(0.0, -dir.dot(Normal(p)));
    return (albedo * (1.0 - view_gain_ + view_gain_ * facing)).cwiseMax(0.0).cwiseMin(1.0);
  }

  Aabb Bounds() const override { return bounds_; }
  bool IsLipschitz() const override { return true; }

  const Shape& shape() const { return shape_; }
  const Texture& texture() const { return texture_; }
  double view_gain() const { return view_gain_; }

  /// Same geometry and texture without view dependence.
  AnalyticField Diffuse() const { return AnalyticField(shape_, texture_, 0.0); }

 private:
  Shape shape_;
  Texture texture_;
  double view_gain_;
  Aabb bounds_;
  double grad_lo_ = 0.0, grad_hi_ = 0.0;
};

// ---------------------------------------------------------------------------
// Sampled grid fields

/// Scalars and colors on a regular lattice, x fastest then y then z.
/// Queries are trilinear; points outside the box clamp to the edge values, so
/// surfaces must lie strictly inside the box.
class GridField final : public VolumeField {
 public:
  GridField(std::array<int, 3> dims, Aabb box, std::vector<double> scalars,
            std::vector<Rgb> colors)
      : dims_(dims), box_(box), scalars_(std::move(scalars)), colors_(std::move(colors)) {
    if (dims_[0] < 2 || dims_[1] < 2 || dims_[2] < 2)
      throw Error(Errc::kInvalidArgument, "grid needs at least 2 nodes per axis");
    if (box_.degenerate()) throw Error(Errc::kInvalidArgument, "grid bbox is degenerate");
    const size_t count = node_count();
    if (scalars_.size() != count || colors_.size() != count)
      throw Error(Errc::kInvalidArgument, "grid arrays do not match dims");
    for (int a = 0; a < 3; ++a) cell_[a] = box_.extent()[a] / (dims_[a] - 1);
  }

  /// Samples `f` on a lattice spanning `box`. Colors are taken along the
  /// inward normal (the direction a camera facing the surface would use).
  static GridField Sample(const VolumeField& f, std::array<int, 3> dims, const Aabb& box) {
    std::vector<double> s;
    std::vector<Rgb> c;
    const size_t count = static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    s.reserve(count);
    c.reserve(count);
    const double h = 1e-6 * box.diagonal();
    for (int k = 0; k < dims[2]; ++k)
      for (int j = 0; j < dims[1]; ++j)
        for (int i = 0; i < dims[0]; ++i) {
          Vec3 p = NodePosition(box, dims, i, j, k);
          s.push_back(f.Scalar(p));
          Vec3 g = Gradient(f, p, h);
          Vec3 d = g.norm() > 0.0 ? Vec3(-g.normalized()) : Vec3(-Vec3::UnitZ());
          c.push_back(f.Color(p, d));
        }
    return GridField(dims, box, std::move(s), std::move(c));
  }

  static Vec3 NodePosition(const Aabb& box, std::array<int, 3> dims, int i, int j, int k) {
    Vec3 e = box.extent();
    return {box.min.x() + e.x() * i / (dims[0] - 1), box.min.y() + e.y() * j / (dims[1] - 1),
            box.min.z() + e.z() * k / (dims[2] - 1)};
  }

  size_t node_count() const { return static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2]; }
  size_t Index(int i, int j, int k) const {
    return static_cast<size_t>(i) + static_cast<size_t>(dims_[0]) * (j + static_cast<size_t>(dims_[1]) * k);
  }

  double Scalar(const Vec3& p) const override {
    return Interpolate(p, [&](size_t idx) { return scalars_[idx]; });
  }
  Rgb Color(const Vec3& p, const Vec3&) const override {
    Rgb c = Interpolate(p, [&](size_t idx) { return colors_[idx]; });
    return c.cwiseMax(0.0).cwiseMin(1.0);
  }
  Aabb Bounds() const override { return box_; }
  double MarchStep() const override { return 0.5 * cell_.minCoeff(); }

  std::array<int, 3> dims() const { return dims_; }
  const std::vector<double>& scalars() const { return scalars_; }
  const std::vector<Rgb>& colors() const { return colors_; }

 private:
  template <class Get>
  auto Interpolate(const Vec3& p, Get get) const -> decltype(get(size_t{})) {
    int i0[3];
    double fr[3];
    for (int a = 0; a < 3; ++a) {
      double u = (std::clamp(p[a], box_.min[a], box_.max[a]) - box_.min[a]) / cell_[a];
      double r = std::round(u);
      if (std::abs(u - r) < 1e-9) u = r;  // land exactly on nodes
      int i = std::clamp(static_cast<int>(std::floor(u)), 0, dims_[a] - 2);
      i0[a] = i;
      fr[a] = std::clamp(u - i, 0.0, 1.0);
    }
    using T = decltype(get(size_t{}));
    T acc = get(Index(i0[0], i0[1], i0[2])) * 0.0;
    for (int c = 0; c < 8; ++c) {
      int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      double w = (dx ? fr[0] : 1.0 - fr[0]) * (dy ? fr[1] : 1.0 - fr[1]) * (dz ? fr[2] : 1.0 - fr[2]);
      if (w == 0.0) continue;
      acc = acc + get(Index(i0[0] + dx, i0[1] + dy, i0[2] + dz)) * w;
    }
    return acc;
  }

  std::array<int, 3> dims_;
  Aabb box_;
  std::vector<double> scalars_;
  std::vector<Rgb> colors_;
  Vec3 cell_;
};

// ---------------------------------------------------------------------------
// Posed fields and unions

/// A base field scaled uniformly by `scale` in its own frame and then placed
/// by `pose`: a base point q appears at pose(scale * q). Distances scale with
/// it, so the result stays a proper SDF when the base is one.
class PosedScaledField final : public VolumeField {
 public:
  PosedScaledField(FieldPtr base, Pose pose, double scale)
      : base_(std::move(base)), pose_(pose), inv_(Invert(pose)), scale_(scale) {
    if (!base_) throw Error(Errc::kInvalidArgument, "posed field has no base");
    if (!(scale_ > 0.0)) throw Error(Errc::kNonPositiveScale, "field scale must be positive");
    Aabb b = base_->Bounds();
    for (int i = 0; i < 8; ++i) bounds_.Extend(Apply(pose_, scale_ * b.Corner(i)));
  }

  Vec3 ToBase(const Vec3& p) const { return Apply(inv_, p) / scale_; }

  double Scalar(const Vec3& p) const override { return scale_ * base_->Scalar(ToBase(p)); }
  Rgb Color(const Vec3& p, const Vec3& dir) const override {
    return base_->Color(ToBase(p), inv_.r * dir);
  }
  Aabb Bounds() const override { return bounds_; }
  bool IsLipschitz() const override { return base_->IsLipschitz(); }
  double MarchStep() const override { return scale_ * base_->MarchStep(); }

  const FieldPtr& base() const { return base_; }
  const Pose& pose() const { return pose_; }
  double scale() const { return scale_; }

 private:
  FieldPtr base_;
  Pose pose_;
  Pose inv_;
  double scale_;
  Aabb bounds_;
};

/// Pointwise minimum of its parts; color comes from the part attaining the
/// minimum (first part wins ties).
class UnionField final : public VolumeField {
 public:
  explicit UnionField(std::vector<FieldPtr> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw Error(Errc::kEmptyUnion, "union of zero fields");
    for (const auto& p : parts_) {
      if (!p) throw Error(Errc::kInvalidArgument, "null field in union");
      bounds_.Extend(p->Bounds());
      lipschitz_ = lipschitz_ && p->IsLipschitz();
      step_ = std::min(step_, p->MarchStep());
    }
  }

  double Scalar(const Vec3& p) const override { return Winner(p).second; }
  Rgb Color(const Vec3& p, const Vec3& dir) const override {
    return parts_[Winner(p).first]->Color(p, dir);
  }
  Aabb Bounds() const override { return bounds_; }
  bool IsLipschitz() const override { return lipschitz_; }
  double MarchStep() const override { return step_; }

  const std::vector<FieldPtr>& parts() const { return parts_; }

  std::pair<size_t, double> Winner(const Vec3& p) const {
    size_t best = 0;
    double v = parts_[0]->Scalar(p);
    for (size_t i = 1; i < parts_.size(); ++i) {
      double s = parts_[i]->Scalar(p);
      if (s < v) {
        v = s;
        best = i;
      }
    }
    return {best, v};
  }

 private:
  std::vector<FieldPtr> parts_;
  Aabb bounds_;
  bool lipschitz_ = true;
  double step_ = std::numeric_limits<double>::infinity();
};

inline std::shared_ptr<const UnionField> MakeUnionField(std::span<const PosedScaledField> parts) {
  if (parts.empty()) throw Error(Errc::kEmptyUnion, "union of zero fields");
  std::vector<FieldPtr> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(std::make_shared<PosedScaledField>(p));
  return std::make_shared<UnionField>(std::move(ptrs));
}

// ---------------------------------------------------------------------------
// Ray marching

struct RayHit {
  Vec3 point;
  double distance = 0.0;
};

/// First zero crossing along origin + s * dir inside the field bounds.
///
/// Lipschitz fields are sphere traced (advancing by the scalar value, with a
/// floor of 5e-5 * diagonal) and the bracket is bisected to rounding level.
/// Other fields are sampled every MarchStep() and bisected 40 times.
inline std::optional<RayHit> RayMarch(const VolumeField& f, const Vec3& origin, const Vec3& dir) {
  if (std::abs(dir.norm() - 1.0) > 1e-9)
    throw Error(Errc::kInvalidArgument, "ray direction must be unit length");
  const Aabb box = f.Bounds();
  double t0, t1;
  if (!box.IntersectRay(origin, dir, t0, t1)) return std::nullopt;
  const double diag = box.diagonal();
  auto at = [&](double s) { return f.Scalar(origin + s * dir); };

  double lo = t0, hi = t0;
  double f_lo = at(t0);
  bool bracketed = false;
  int bisections = 40;
  if (f.IsLipschitz() && f_lo > 0.0) {
    const double min_step = 5e-5 * diag;
    double s = t0, v = f_lo;
    for (int it = 0; it < 1000000; ++it) {
      double next = std::min(s + std::max(v, min_step), t1);
      double vn = at(next);
      if ((vn <= 0.0) != (v <= 0.0)) {
        lo = s; f_lo = v; hi = next;
        bracketed = true;
        break;
      }
      if (next >= t1) break;
      s = next;
      v = vn;
    }
    bisections = 200;
  } else {
    const double step = std::max(f.MarchStep(), 1e-9 * diag);
    double s = t0, v = f_lo;
    while (s < t1) {
      double next = std::min(s + step, t1);
      double vn = at(next);
      if ((vn <= 0.0) != (v <= 0.0)) {
        lo = s; f_lo = v; hi = next;
        bracketed = true;
        break;
      }
      s = next;
      v = vn;
    }
  }
  if (!bracketed) return std::nullopt;

  const bool lo_inside = f_lo <= 0.0;
  for (int i = 0; i < bisections; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((at(mid) <= 0.0) == lo_inside)
      lo = mid;
    else
      hi = mid;
  }
  double s = 0.5 * (lo + hi);
  return RayHit{origin + s * dir, s};
}

}  // namespace meshforge
