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

#include <gtest/gtest.h>

#include <random>

#include "meshforge/field.hpp"
#include "test_support.hpp"

namespace meshforge {
namespace {

using testing::kPi;

AnalyticField UnitSphere() { return AnalyticField(Shape::Sphere(Vec3::Zero(), 1.0), ConstantTexture{}); }

/// Scalar field f(p) = z, Lipschitz and exactly linear.
class PlaneField final : public VolumeField {
 public:
  double Scalar(const Vec3& p) const override { return p.z(); }
  Rgb Color(const Vec3&, const Vec3&) const override { return Rgb::Constant(0.5); }
  Aabb Bounds() const override { return {Vec3::Constant(-1), Vec3::Constant(1)}; }
};

// --- analytic SDFs -------------------------------------------------------------

TEST(AnalyticField, SphereExamples) {
  AnalyticField f = UnitSphere();
  EXPECT_EQ(f.Scalar({0, 0, 0}), -1.0);
  EXPECT_EQ(f.Scalar({2, 0, 0}), 1.0);
}

TEST(AnalyticField, PrimitiveDistances) {
  Shape box = Shape::Box(Vec3::Zero(), Vec3::Ones());
  EXPECT_NEAR(box.Distance({2, 0, 0}), 1.0, 1e-15);
  EXPECT_NEAR(box.Distance({2, 2, 0}), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(box.Distance({0.5, 0, 0}), -0.5, 1e-15);
  Shape cyl = Shape::Cylinder(Vec3::Zero(), Vec3::UnitZ(), 1.0, 1.0);
  EXPECT_NEAR(cyl.Distance({2, 0, 0}), 1.0, 1e-15);
  EXPECT_NEAR(cyl.Distance({0, 0, 3}), 2.0, 1e-15);
  EXPECT_NEAR(cyl.Distance({2, 0, 3}), std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(cyl.Distance({0, 0, 0.5}), -0.5, 1e-15);
  Shape tilted = Shape::Cylinder(Vec3(1, 1, 1), Vec3::UnitX(), 0.5, 2.0);
  EXPECT_NEAR(tilted.Distance({4, 1, 1}), 1.0, 1e-15);
  EXPECT_NEAR(tilted.Distance({1, 2, 1}), 0.5, 1e-15);
  Shape torus = Shape::Torus(Vec3::Zero(), 1.0, 0.25);
  EXPECT_NEAR(torus.Distance({1, 0, 0}), -0.25, 1e-15);
  EXPECT_NEAR(torus.Distance({0, 0, 0}), 0.75, 1e-15);
  EXPECT_NEAR(torus.Distance({2, 0, 0}), 0.75, 1e-15);
  EXPECT_NEAR(torus.Distance({0, 1, 0.5}), 0.25, 1e-15);
}

TEST(AnalyticField, CsgCombinators) {
  Shape a = Shape::Sphere(Vec3::Zero(), 1.0), b = Shape::Box(Vec3(1, 0, 0), Vec3::Constant(0.5));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 200; ++i) {
    Vec3 p(u(rng), u(rng), u(rng));
    const double da = a.Distance(p), db = b.Distance(p);
    EXPECT_EQ((a | b).Distance(p), std::min(da, db));
    EXPECT_EQ((a & b).Distance(p), std::max(da, db));
    EXPECT_EQ((a - b).Distance(p), std::max(da, -db));
  }
}

TEST(AnalyticField, InvalidParametersRejected) {
  EXPECT_THROW(Shape::Sphere(Vec3::Zero(), 0.0), Error);
  EXPECT_THROW(Shape::Box(Vec3::Zero(), Vec3(1, 0, 1)), Error);
  EXPECT_THROW(Shape::Torus(Vec3::Zero(), 0.2, 0.0), Error);
  EXPECT_THROW(Shape::Cylinder(Vec3::Zero(), Vec3::Zero(), 1.0, 1.0), Error);
  EXPECT_THROW(AnalyticField(Shape::Sphere(Vec3::Zero(), 1), ConstantTexture{}, 1.5), Error);
  EXPECT_THROW(AnalyticField(Shape::Sphere(Vec3::Zero(), 1), CheckerTexture{Rgb::Zero(), Rgb::Ones(), 0.0}), Error);
}

// Property: points inside / outside a primitive by construction have the
// matching sign.
TEST(AnalyticFieldProperty, CsgSigns) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Shape shapes[] = {Shape::Sphere(Vec3(0.1, 0.2, 0.3), 0.7), Shape::Box(Vec3(0.1, 0, 0), Vec3(0.3, 0.5, 0.7)),
                          Shape::Cylinder(Vec3::Zero(), Vec3(1, 1, 0), 0.4, 0.6),
                          Shape::Torus(Vec3(0, 0, 0.2), 0.6, 0.2)};
  for (int i = 0; i < 500; ++i) {
    const Vec3 d = testing::RandomUnit(rng);
    const double t = u(rng);
    // Sphere: along a radius.
    EXPECT_LT(shapes[0].Distance(Vec3(0.1, 0.2, 0.3) + 0.7 * t * 0.999 * d), 0.0);
    EXPECT_GT(shapes[0].Distance(Vec3(0.1, 0.2, 0.3) + 0.7 * (1.001 + t) * d), 0.0);
    // Box: scaled inside the half extents, or beyond one face.
    Vec3 q(2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1);
    EXPECT_LT(shapes[1].Distance(Vec3(0.1, 0, 0) + 0.999 * q.cwiseProduct(Vec3(0.3, 0.5, 0.7))), 0.0);
    Vec3 out = q.cwiseProduct(Vec3(0.3, 0.5, 0.7));
    out.x() = 0.3 * (1.001 + t);
    EXPECT_GT(shapes[1].Distance(Vec3(0.1, 0, 0) + out), 0.0);
    // Torus: within the tube around the ring.
    const double phi = 2 * kPi * u(rng);
    const Vec3 ring(0.6 * std::cos(phi), 0.6 * std::sin(phi), 0.2);
    EXPECT_LT(shapes[3].Distance(ring + 0.2 * 0.999 * t * d), 0.0);
    EXPECT_GT(shapes[3].Distance(Vec3(0, 0, 0.2) + Vec3(0, 0, 0.2 * (1.001 + t))), 0.0);
  }
  // Cylinder: along and across its axis.
  const Vec3 axis = Vec3(1, 1, 0).normalized();
  EXPECT_LT(shapes[2].Distance(0.59 * axis), 0.0);
  EXPECT_GT(shapes[2].Distance(0.61 * axis), 0.0);
  EXPECT_LT(shapes[2].Distance(Vec3(0, 0, 0.39)), 0.0);
  EXPECT_GT(shapes[2].Distance(Vec3(0, 0, 0.41)), 0.0);
}

TEST(AnalyticField, Textures) {
  AnalyticField c(Shape::Sphere(Vec3::Zero(), 1), ConstantTexture{Rgb(0.1, 0.2, 0.3)});
  EXPECT_EQ(c.Albedo({1, 0, 0}), Rgb(0.1, 0.2, 0.3));
  AnalyticField k(Shape::Sphere(Vec3::Zero(), 1), CheckerTexture{Rgb::Zero(), Rgb::Ones(), 0.5});
  EXPECT_EQ(k.Albedo({0.25, 0.25, 0.25}), Rgb::Zero());
  EXPECT_EQ(k.Albedo({0.75, 0.25, 0.25}), Rgb::Ones());
  EXPECT_EQ(k.Albedo({0.75, 0.75, 0.25}), Rgb::Zero());
  EXPECT_EQ(k.Albedo({-0.25, 0.25, 0.25}), Rgb::Ones());
  AnalyticField g(Shape::Sphere(Vec3::Zero(), 1), GradientTexture{Rgb::Zero(), Rgb(1, 0.5, 0), Vec3(0, 0, 2)});
  EXPECT_LT((g.Albedo({0, 0, -1}) - Rgb::Zero()).norm(), 1e-15);
  EXPECT_LT((g.Albedo({0, 0, 1}) - Rgb(1, 0.5, 0)).norm(), 1e-15);
  EXPECT_LT((g.Albedo({0.3, 0, 0}) - Rgb(0.5, 0.25, 0)).norm(), 1e-15);
}

TEST(AnalyticField, ViewDependentColor) {
  const Rgb albedo(0.8, 0.6, 0.4);
  AnalyticField full(Shape::Sphere(Vec3::Zero(), 1), ConstantTexture{albedo}, 1.0);
  const Vec3 p(1, 0, 0), n(1, 0, 0);
  EXPECT_LT((full.Color(p, -n) - albedo).norm(), 1e-9);
  EXPECT_LT(full.Color(p, n).norm(), 1e-15);
  const Vec3 oblique = Vec3(-1, 1, 0).normalized();
  EXPECT_LT((full.Color(p, oblique) - albedo * std::sqrt(0.5)).norm(), 1e-9);
  AnalyticField half(Shape::Sphere(Vec3::Zero(), 1), ConstantTexture{albedo}, 0.5);
  EXPECT_LT((half.Color(p, Vec3::UnitY()) - 0.5 * albedo).norm(), 1e-9);
  AnalyticField diffuse = full.Diffuse();
  EXPECT_EQ(diffuse.Color(p, n), albedo);
  EXPECT_EQ(diffuse.view_gain(), 0.0);
}

// --- gradients -------------------------------------------------------------------

TEST(Gradient, RadialOnSphere) {
  Vec3 g = Gradient(UnitSphere(), {0.5, 0, 0}, 1e-4);
  EXPECT_LT((g - Vec3(1, 0, 0)).norm(), 1e-6);
}

TEST(Gradient, PlaneIsExact) {
  PlaneField f;
  EXPECT_EQ(Gradient(f, {0.3, -0.2, 0.1}, 1e-3), Vec3(0, 0, 1));
  EXPECT_EQ(Gradient(f, {0.3, -0.2, 0.1}, 0.25), Vec3(0, 0, 1));
}

TEST(Gradient, TorusNormalsMatchClosedForm) {
  const Vec3 c(0.1, -0.2, 0.05);
  const double major = 0.6, minor = 0.2;
  AnalyticField f(Shape::Torus(c, major, minor), ConstantTexture{});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 2 * kPi);
  for (int i = 0; i < 500; ++i) {
    const double phi = u(rng), theta = u(rng);
    const Vec3 ring = c + major * Vec3(std::cos(phi), std::sin(phi), 0);
    const Vec3 n(std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), std::sin(theta));
    const Vec3 p = ring + minor * n;
    const Vec3 g = Gradient(f, p, 1e-5).normalized();
    EXPECT_LT((g - n).norm(), 1e-4);
  }
}

// --- grids -------------------------------------------------------------------------

TEST(GridField, ValidatesShape) {
  Aabb box(Vec3::Zero(), Vec3::Ones());
  EXPECT_THROW(GridField({1, 2, 2}, box, std::vector<double>(4), std::vector<Rgb>(4)), Error);
  EXPECT_THROW(GridField({2, 2, 2}, box, std::vector<double>(7), std::vector<Rgb>(8)), Error);
  EXPECT_THROW(GridField({2, 2, 2}, Aabb(Vec3::Zero(), Vec3(1, 0, 1)), std::vector<double>(8), std::vector<Rgb>(8)),
               Error);
}

TEST(GridFieldProperty, NodesReproducedExactly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::array<int, 3> dims{5, 7, 4};
  const Aabb box(Vec3(-0.3, 0.1, -2), Vec3(0.9, 0.7, 1.3));
  std::vector<double> s(5 * 7 * 4);
  std::vector<Rgb> c(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    c[i] = Rgb(0.5 + 0.5 * u(rng), 0.5, 0.5);
  }
  GridField g(dims, box, s, c);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const Vec3 p = GridField::NodePosition(box, dims, i, j, k);
        EXPECT_EQ(g.Scalar(p), s[g.Index(i, j, k)]);
        EXPECT_EQ(g.Color(p, Vec3::UnitZ()), c[g.Index(i, j, k)]);
      }
}

TEST(GridField, ClampsOutsideBox) {
  GridField g = GridField::Sample(UnitSphere(), {9, 9, 9}, Aabb(Vec3::Constant(-2), Vec3::Constant(2)));
  EXPECT_EQ(g.Scalar({5, 0, 0}), g.Scalar({2, 0, 0}));
  EXPECT_EQ(g.Scalar({-7, -7, -7}), g.Scalar({-2, -2, -2}));
}

TEST(GridField, MatchesAnalyticWithinTrilinearBound) {
  AnalyticField f = UnitSphere();
  const Aabb box(Vec3::Constant(-1.5), Vec3::Constant(1.5));
  GridField g = GridField::Sample(f, {64, 64, 64}, box);
  const double h = 3.0 / 63.0, rmin = 0.3;
  // Per-axis trilinear error is at most h^2/8 |f_ii|, and |f_ii| <= 1/|p| for
  // the sphere distance.
  const double bound = std::max(3.0 * h * h / (8.0 * rmin), 1e-3);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.4, 1.4);
  int checked = 0;
  while (checked < 1000) {
    Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() < rmin + h * std::sqrt(3.0)) continue;
    EXPECT_LE(std::abs(g.Scalar(p) - f.Scalar(p)), bound) << p.transpose();
    ++checked;
  }
}

// --- ray marching ------------------------------------------------------------------

TEST(RayMarch, AxialSphereHit) {
  AnalyticField f(Shape::Sphere(Vec3::Zero(), 0.4), ConstantTexture{});
  auto hit = RayMarch(f, {0, 0, -2}, {0, 0, 1});
  ASSERT_TRUE(hit);
  EXPECT_LT((hit->point - Vec3(0, 0, -0.4)).norm(), 1e-6);
  EXPECT_NEAR(hit->distance, 1.6, 1e-6);
}

TEST(RayMarch, MissReturnsEmpty) {
  AnalyticField f(Shape::Sphere(Vec3::Zero(), 0.4), ConstantTexture{});
  EXPECT_FALSE(RayMarch(f, {0, 0, -2}, {0, 1, 0}));
  EXPECT_FALSE(RayMarch(f, {0, 0, -2}, {0, 0, -1}));
}

TEST(RayMarch, RejectsNonUnitDirection) { EXPECT_THROW(RayMarch(UnitSphere(), {0, 0, -3}, {0, 0, 2}), Error); }

double RaySphere(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double b = oc.dot(d), cc = oc.squaredNorm() - r * r;
  return -b - std::sqrt(b * b - cc);
}

// Property: 500 random rays against the quadratic-formula intersection; the
// hit is on the surface and no earlier sign change exists at march resolution.
TEST(RayMarchProperty, MatchesClosedFormSphere) {
  const Vec3 c(0.05, -0.1, 0.02);
  const double r = 0.4;
  AnalyticField f(Shape::Sphere(c, r), ConstantTexture{});
  const double diag = f.Bounds().diagonal();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 o = c + 2.0 * testing::RandomUnit(rng);
    const Vec3 aim = c + 0.35 * u(rng) * testing::RandomUnit(rng);
    const Vec3 d = (aim - o).normalized();
    auto hit = RayMarch(f, o, d);
    ASSERT_TRUE(hit) << i;
    EXPECT_NEAR(hit->distance, RaySphere(o, d, c, r), 1e-6);
    EXPECT_LT(std::abs(f.Scalar(hit->point)), 1e-6 * diag);
    const double step = f.MarchStep();
    for (double s = 0.0; s < hit->distance - step; s += step) ASSERT_GT(f.Scalar(o + s * d), 0.0);
  }
}

TEST(RayMarch, GridFieldUsesFixedStepping) {
  AnalyticField f(Shape::Sphere(Vec3::Zero(), 0.4), ConstantTexture{});
  GridField g = GridField::Sample(f, {64, 64, 64}, Aabb(Vec3::Constant(-0.5), Vec3::Constant(0.5)));
  EXPECT_FALSE(g.IsLipschitz());
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const Vec3 o = 1.5 * testing::RandomUnit(rng);
    const Vec3 d = (0.1 * testing::RandomUnit(rng) - o).normalized();
    auto hit = RayMarch(g, o, d);
    ASSERT_TRUE(hit);
    EXPECT_LT(std::abs(g.Scalar(hit->point)), 1e-6 * g.Bounds().diagonal());
    EXPECT_NEAR(hit->distance, RaySphere(o, d, Vec3::Zero(), 0.4), 1e-3);
  }
}

// --- posed and union fields --------------------------------------------------------

TEST(PosedScaledField, MatchesDefinition) {
  auto base = std::make_shared<AnalyticField>(Shape::Torus(Vec3(0.1, 0, 0), 0.5, 0.15), CheckerTexture{});
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose pose = testing::RandomPose(rng);
    const double s = 0.25 + 3.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    PosedScaledField f(base, pose, s);
    const Mat4 inv = pose.Matrix().inverse();
    for (int i = 0; i < 50; ++i) {
      const Vec3 p = Vec3::Random() * 2.0;
      const Vec3 q = (inv * p.homogeneous()).head<3>() / s;
      EXPECT_NEAR(f.Scalar(p), s * base->Scalar(q), 1e-12);
    }
    // Bounds enclose the transformed base bounds.
    const Aabb b = base->Bounds();
    for (int c = 0; c < 8; ++c) EXPECT_TRUE(f.Bounds().Padded(1e-12).Contains(Apply(pose, s * b.Corner(c))));
  }
  EXPECT_THROW(PosedScaledField(base, Pose::Identity(), 0.0), Error);
}

TEST(PosedScaledField, ColorRotatesDirection) {
  auto base = std::make_shared<AnalyticField>(Shape::Sphere(Vec3::Zero(), 1.0), ConstantTexture{Rgb::Ones()}, 1.0);
  const Pose pose{AxisAngle(Vec3::UnitZ(), kPi / 2), Vec3(3, 0, 0)};
  PosedScaledField f(base, pose, 2.0);
  // Base point (1,0,0) with outward normal +x lands at (3,2,0) facing +y.
  const Vec3 p = Apply(pose, Vec3(2, 0, 0));
  EXPECT_LT((f.Color(p, Vec3(0, -1, 0)) - Rgb::Ones()).norm(), 1e-6);
  EXPECT_LT(f.Color(p, Vec3(0, 1, 0)).norm(), 1e-9);
}

TEST(UnionField, EmptyThrows) {
  try {
    MakeUnionField(std::span<const PosedScaledField>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmptyUnion);
  }
  EXPECT_THROW(UnionField({}), Error);
}

TEST(UnionField, SingletonBehavesLikeBase) {
  auto base = std::make_shared<AnalyticField>(Shape::Box(Vec3(0.1, 0, 0), Vec3(0.3, 0.4, 0.5)),
                                              CheckerTexture{Rgb(1, 0, 0), Rgb(0, 0, 1), 0.1}, 0.3);
  std::vector<PosedScaledField> parts{PosedScaledField(base, Pose::Identity(), 1.0)};
  auto u = MakeUnionField(parts);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = Vec3::Random();
    const Vec3 d = testing::RandomUnit(rng);
    EXPECT_EQ(u->Scalar(p), base->Scalar(p));
    EXPECT_EQ(u->Color(p, d), base->Color(p, d));
  }
}

TEST(UnionField, DisjointSpheres) {
  auto s = std::make_shared<AnalyticField>(Shape::Sphere(Vec3::Zero(), 1.0), ConstantTexture{});
  std::vector<PosedScaledField> parts{PosedScaledField(s, Pose::Translation({2, 0, 0}), 1.0),
                                      PosedScaledField(s, Pose::Translation({-2, 0, 0}), 1.0)};
  auto u = MakeUnionField(parts);
  EXPECT_NEAR(u->Scalar(Vec3::Zero()), 1.0, 1e-15);
}

// Property: union scalar is the pointwise minimum and the color comes from the
// minimizing part, checked against an independent loop on a 22^3 lattice.
TEST(UnionFieldProperty, PointwiseMinimumOracle) {
  auto red = std::make_shared<AnalyticField>(Shape::Sphere(Vec3::Zero(), 0.5), ConstantTexture{Rgb(1, 0, 0)});
  auto blue = std::make_shared<AnalyticField>(Shape::Sphere(Vec3::Zero(), 0.4), ConstantTexture{Rgb(0, 0, 1)});
  std::vector<PosedScaledField> parts{PosedScaledField(red, Pose::Translation({-0.3, 0, 0}), 1.0),
                                      PosedScaledField(blue, Pose::Translation({0.35, 0.05, 0}), 1.3)};
  auto u = MakeUnionField(parts);
  EXPECT_LT(u->Scalar({-0.3, 0, 0}), 0.0);
  EXPECT_LT(u->Scalar({0.35, 0.05, 0}), 0.0);
  const int n = 22;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 p = Vec3(-1.2, -1.2, -1.2) + 2.4 / (n - 1) * Vec3(i, j, k);
        const double a = parts[0].Scalar(p), b = parts[1].Scalar(p);
        EXPECT_EQ(u->Scalar(p), std::min(a, b));
        EXPECT_EQ(u->Scalar(p) < 0.0, a < 0.0 || b < 0.0);
        EXPECT_EQ(u->Color(p, Vec3::UnitX()), b < a ? Rgb(0, 0, 1) : Rgb(1, 0, 0));
      }
}

TEST(UnionField, BoundsAndMarchStep) {
  auto s = std::make_shared<AnalyticField>(Shape::Sphere(Vec3::Zero(), 1.0), ConstantTexture{});
  auto g = std::make_shared<GridField>(GridField::Sample(*s, {8, 8, 8}, s->Bounds()));
  UnionField u({std::make_shared<PosedScaledField>(s, Pose::Translation({5, 0, 0}), 1.0), g});
  EXPECT_FALSE(u.IsLipschitz());
  EXPECT_EQ(u.MarchStep(), std::min(s->MarchStep(), g->MarchStep()));
  EXPECT_TRUE(u.Bounds().Contains(Vec3(6, 0, 0)));
  EXPECT_TRUE(u.Bounds().Contains(Vec3(-1, 0, 0)));
}

}  // namespace
}  // namespace meshforge
