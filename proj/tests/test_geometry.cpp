#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fracball/geometry.hpp"
#include "support.hpp"

using namespace fracball;

namespace {

double nearest_to_origin(const Mesh& m) {
  double d = 1e300;
  for (const Point& x : m.nodes) d = std::min(d, (x - m.grading_point()).norm());
  return d;
}

bool in_cone_scan(const Point& x) {
  for (int i = 1; i < 10000; ++i) {
    const double t = i * 1e-4;
    if ((x - Point::axis(x.dim, t)).norm() < t / 8.0) return true;
  }
  return false;
}

}  // namespace

TEST(Mesh, WeightsSumToBallArea) {
  const Mesh m = build_graded_mesh(BallDomain::unit_shifted(2), 16, 1.0);
  EXPECT_LT(std::abs(m.total_weight() / std::numbers::pi - 1.0), 0.01);
}

TEST(Mesh, WeightsSumToBallVolumeForAllSettings) {
  for (int N : {2, 3})
    for (int M : {4, 8, 16, 33})
      for (double g : {1.0, 1.5, 2.0, 3.0}) {
        const Mesh m = build_graded_mesh(BallDomain::unit_shifted(N), M, g);
        EXPECT_LT(std::abs(m.total_weight() / ball_volume(N) - 1.0), 1e-10) << N << " " << M << " " << g;
      }
}

TEST(Mesh, NodesInsideWeightsPositiveCountMatches) {
  for (int N : {2, 3})
    for (int M : {6, 16}) {
      const Mesh m = build_graded_mesh(BallDomain::unit_shifted(N), M);
      EXPECT_EQ(m.size(), graded_mesh_size(N, M));
      EXPECT_EQ(m.weights.size(), m.nodes.size());
      for (int k = 0; k < m.size(); ++k) {
        EXPECT_GT(boundary_distance(m.domain, m.nodes[k]), 0.0);
        EXPECT_GT(m.weights[k], 0.0);
        EXPECT_EQ(m.nodes[k].dim, N);
      }
    }
}

TEST(Mesh, ClusteredAtGradingPoint) {
  const Mesh m = build_graded_mesh(BallDomain::unit_shifted(2), 32, 2.0);
  EXPECT_LT(nearest_to_origin(m), (1.0 / 32) * (1.0 / 32) * 2.0);
  EXPECT_NEAR(m.grading_point().norm(), 0.0, 0.0);
}

TEST(Mesh, DoublingResolutionHalvesNearestDistance) {
  for (int N : {2, 3})
    for (double g : {1.0, 2.0})
      for (int M : {8, 16, 32}) {
        const double a = nearest_to_origin(build_graded_mesh(BallDomain::unit_shifted(N), M, g));
        const double b = nearest_to_origin(build_graded_mesh(BallDomain::unit_shifted(N), 2 * M, g));
        EXPECT_LE(b, 0.5 * a * (1.0 + 1e-12)) << N << " " << g << " " << M;
      }
}

TEST(Mesh, HashIsDeterministicAndDiscriminating) {
  const auto d = BallDomain::unit_shifted(2);
  EXPECT_EQ(build_graded_mesh(d, 16).mesh_hash, build_graded_mesh(d, 16).mesh_hash);
  EXPECT_NE(build_graded_mesh(d, 16).mesh_hash, build_graded_mesh(d, 17).mesh_hash);
  EXPECT_NE(build_graded_mesh(d, 16, 2.0).mesh_hash, build_graded_mesh(d, 16, 1.5).mesh_hash);
  EXPECT_NE(build_graded_mesh(d, 16).mesh_hash, build_graded_mesh(BallDomain::unit_centered(2), 16).mesh_hash);
  EXPECT_NE(build_graded_mesh(d, 16).mesh_hash, build_graded_mesh(BallDomain::unit_shifted(3), 16).mesh_hash);
}

TEST(Mesh, MirrorPairsInTwoDimensions) {
  const Mesh m = build_graded_mesh(BallDomain::unit_shifted(2), 12);
  for (int j = 0; j < m.n_angular; ++j)
    for (int i = 0; i < m.n_radial; ++i) {
      const Point& a = m.nodes[m.index(i, j)];
      const Point& b = m.nodes[m.index(i, m.n_angular - 1 - j)];
      EXPECT_NEAR(a[0], -b[0], 1e-14);
      EXPECT_NEAR(a[1], b[1], 1e-14);
    }
}

TEST(Mesh, ParametersInvertMap) {
  const Mesh m = build_graded_mesh(BallDomain::unit_shifted(3), 10, 2.0);
  for (int t = 0; t < 100; ++t) {
    const double xi = fbtest::uniform(0.01, 0.99), eta = fbtest::uniform(0.01, 0.99);
    const auto [a, b] = m.parameters(m.map(xi, eta));
    EXPECT_NEAR(a, xi, 1e-12);
    EXPECT_NEAR(b, eta, 1e-10);
  }
}

TEST(Mesh, RejectsBadInputs) {
  EXPECT_THROW(build_graded_mesh(BallDomain::unit_shifted(2), 3), DomainError);
  EXPECT_THROW(build_graded_mesh(BallDomain::unit_shifted(2), 8, 0.5), DomainError);
  EXPECT_THROW(build_graded_mesh(BallDomain{2, Point(2), -1.0}, 8), DomainError);
}

TEST(BoundaryDistance, Examples) {
  const auto d = BallDomain::unit_shifted(2);
  EXPECT_DOUBLE_EQ(boundary_distance(d, d.center), 1.0);
  EXPECT_DOUBLE_EQ(boundary_distance(d, Point(2)), 0.0);
  EXPECT_DOUBLE_EQ(boundary_distance(d, Point::axis(2, 2.0)), 0.0);
  EXPECT_DOUBLE_EQ(boundary_distance(d, Point::axis(2, 3.0)), -1.0);
}

TEST(InCone, Examples) {
  EXPECT_TRUE(in_cone(Point::axis(2, 0.5)));
  EXPECT_FALSE(in_cone(Point{0.9, 1.0}));
  EXPECT_FALSE(in_cone(Point(3)));
}

TEST(InCone, AgreesWithScanOverT) {
  for (int i = 0; i < 400; ++i) {
    const int N = 2 + i % 2;
    Point x(N);
    x[0] = fbtest::uniform(-0.2, 0.2);
    x[N - 1] = fbtest::uniform(-0.1, 1.2);
    // skip points within the scan's resolution of the cone surface
    const double t = std::clamp(x.norm2() / std::max(x[N - 1], 1e-9), 1e-4, 0.9999);
    const double q = (x - Point::axis(N, t)).norm() / t - 0.125;
    if (std::abs(q) < 1e-3) continue;
    EXPECT_EQ(in_cone(x), in_cone_scan(x)) << x;
  }
}

TEST(InCone, ConeLiesInBall) {
  const auto d2 = BallDomain::unit_shifted(2), d3 = BallDomain::unit_shifted(3);
  int found = 0;
  for (int i = 0; i < 2000; ++i) {
    const int N = 2 + i % 2;
    const double t = fbtest::uniform(0.0, 1.0);
    Point x = Point::axis(N, t);
    Point v(N);
    for (int k = 0; k < N; ++k) v[k] = fbtest::uniform(-1.0, 1.0);
    x = x + v * (t / 8.0 / std::sqrt(N));
    if (!in_cone(x)) continue;
    ++found;
    EXPECT_GT(boundary_distance(N == 2 ? d2 : d3, x), 0.0) << x;
  }
  EXPECT_GT(found, 1000);
}

TEST(AxialCoordinates, Examples) {
  auto [a, b] = axial_coordinates(Point{3.0, 4.0, 0.0});
  EXPECT_DOUBLE_EQ(a, 5.0);
  EXPECT_DOUBLE_EQ(b, 0.0);
  std::tie(a, b) = axial_coordinates(Point::axis(3, 1.0));
  EXPECT_DOUBLE_EQ(a, 0.0);
  EXPECT_DOUBLE_EQ(b, 1.0);
  std::tie(a, b) = axial_coordinates(Point{0.3, 1.2});
  EXPECT_DOUBLE_EQ(a, 0.3);
  EXPECT_DOUBLE_EQ(b, 1.2);
}

TEST(AxialCoordinates, InvariantUnderRotationAboutAxis) {
  for (int i = 0; i < 200; ++i) {
    const Point x{fbtest::uniform(-2, 2), fbtest::uniform(-2, 2), fbtest::uniform(-2, 2)};
    const double th = fbtest::uniform(0.0, 2.0 * std::numbers::pi);
    const Point y{std::cos(th) * x[0] - std::sin(th) * x[1], std::sin(th) * x[0] + std::cos(th) * x[1], x[2]};
    const auto [a, b] = axial_coordinates(x);
    const auto [c, d] = axial_coordinates(y);
    EXPECT_NEAR(a, c, 1e-12);
    EXPECT_EQ(b, d);
    // reflection x' -> -x' as well
    EXPECT_NEAR(axial_coordinates(Point{-x[0], -x[1], x[2]}).first, a, 1e-15);
  }
}

TEST(ProblemParams, Validation) {
  ProblemParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.critical_p(), 1.5);
  p.alpha = 1.0;
  EXPECT_THROW(p.validate(), DomainError);
  p = {};
  p.p = std::nan("");
  EXPECT_THROW(p.validate(), DomainError);
  p = {};
  p.s = -0.1;
  EXPECT_THROW(p.validate(), DomainError);
}
