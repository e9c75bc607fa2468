#include <gtest/gtest.h>

#include <cmath>

#include "fracball/fracop.hpp"
#include "support.hpp"

using namespace fracball;
using fbtest::rel;

namespace {

EvaluableFunction constant_function(double c) {
  EvaluableFunction e;
  e.f = [c](const Point&) { return c; };
  e.smoothness_radius = [](const Point&) { return 1.0; };
  e.decay_constant = c;
  e.decay_exponent = 0.0;
  return e;
}

EvaluableFunction shifted_power(int N, double sigma, const Point& c) {
  EvaluableFunction e = phi_power_function(N, sigma);
  e.f = [sigma, c](const Point& y) { return phi_power(y - c, sigma); };
  e.smoothness_radius = [c](const Point& x) { return (x - c).norm(); };
  e.center = c;
  return e;
}

ProblemParams params(int N, double a, double p) {
  ProblemParams P;
  P.dim = N;
  P.alpha = a;
  P.p = p;
  return P;
}

Point point_at(int N, double r, double th) {
  Point x(N);
  x[0] = r * std::cos(th);
  x[N - 1] = r * std::sin(th);
  return x;
}

}  // namespace

TEST(FracLaplacian, ConstantGivesZero) {
  for (int N : {2, 3}) {
    const double v = frac_laplacian_point(constant_function(3.0), Point::axis(N, 0.4), 0.5, normalization_constant(N, 0.5));
    EXPECT_NEAR(v, 0.0, 1e-8);
  }
}

TEST(FracLaplacian, PowerAtUnitRadiusIsSymbol) {
  for (int N : {2, 3})
    for (double a : {0.3, 0.5, 0.8})
      for (double s : {0.45, 1.1, 0.85 * N}) {
        const double v = frac_laplacian_point(phi_power_function(N, s), point_at(N, 1.0, 0.7), a,
                                              normalization_constant(N, a));
        EXPECT_LT(rel(v, fbtest::symbol_closed(s, N, a)), 1e-4) << N << " " << a << " " << s;
      }
}

TEST(FracLaplacian, SymbolIdentityOnRadiusGrid) {
  for (int N : {2, 3}) {
    const double a = 0.5, cN = normalization_constant(N, a);
    for (double s : {0.3, N - 2.0 * a, 0.9 * N}) {
      const SymbolValue c = symbol_constant(s, N, a);
      for (double r : {0.5, 1.0, 2.0}) {
        const double v = frac_laplacian_point(phi_power_function(N, s), point_at(N, r, 0.3 + r), a, cN) *
                         std::pow(r, s + 2.0 * a);
        if (std::abs(c.value) < 1e-6)
          EXPECT_NEAR(v, 0.0, 1e-6) << N << " " << s << " " << r;
        else
          EXPECT_LT(rel(v, c.value), 1e-3) << N << " " << s << " " << r;
      }
    }
  }
}

TEST(FracLaplacian, TorsionGivesOne) {
  for (int N : {2, 3})
    for (double a : {0.3, 0.5, 0.75}) {
      const auto ball = BallDomain::unit_centered(N);
      const auto V = torsion_function(ball, a);
      for (int i = 0; i < 4; ++i) {
        const Point x = fbtest::random_in_ball(ball, 0.9);
        EXPECT_LT(rel(frac_laplacian_point(V, x, a, normalization_constant(N, a)), 1.0), 0.02) << N << " " << a << x;
      }
    }
}

TEST(FracLaplacian, Linear) {
  const auto ball = BallDomain::unit_centered(2);
  const double a = 0.6, cN = normalization_constant(2, a);
  const auto f = torsion_function(ball, 0.4), g = torsion_function(ball, 0.7);
  for (int i = 0; i < 5; ++i) {
    const double ca = fbtest::uniform(-2, 2), cb = fbtest::uniform(-2, 2);
    EvaluableFunction h = f;
    h.f = [=](const Point& y) { return ca * f(y) + cb * g(y); };
    const Point x = fbtest::random_in_ball(ball, 0.8);
    const double lhs = frac_laplacian_point(h, x, a, cN);
    const double rhs = ca * frac_laplacian_point(f, x, a, cN) + cb * frac_laplacian_point(g, x, a, cN);
    EXPECT_NEAR(lhs, rhs, 1e-5 * (std::abs(ca) + std::abs(cb)) * std::max(1.0, std::abs(rhs)));
  }
}

TEST(FracLaplacian, TranslationCovariant) {
  for (int N : {2, 3}) {
    const double a = 0.45, cN = normalization_constant(N, a), s = 0.7;
    for (int i = 0; i < 4; ++i) {
      Point c(N), x(N);
      for (int k = 0; k < N; ++k) {
        c[k] = fbtest::uniform(-3, 3);
        x[k] = fbtest::uniform(-1, 1);
      }
      const double base = frac_laplacian_point(phi_power_function(N, s), x, a, cN);
      const double moved = frac_laplacian_point(shifted_power(N, s, c), x + c, a, cN);
      EXPECT_LT(rel(moved, base), 1e-6) << N << x << c;
    }
  }
}

TEST(FracLaplacian, RejectsIncompleteFunctions) {
  EvaluableFunction e;
  EXPECT_THROW(frac_laplacian_point(e, Point(2), 0.5, 1.0), DomainError);
  e = constant_function(1.0);
  e.smoothness_radius = [](const Point&) { return 0.0; };
  EXPECT_THROW(frac_laplacian_point(e, Point(2), 0.5, 1.0), DomainError);
}

TEST(PhiPower, Values) {
  EXPECT_DOUBLE_EQ(phi_power(Point::axis(2, 1.0), 1.7), 1.0);
  EXPECT_DOUBLE_EQ(phi_power(Point{0.3, -2.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(phi_power(Point::axis(3, 2.0), 2.0), 0.25);
  EXPECT_THROW(phi_power(Point(2), 1.0), DomainError);
}

TEST(ScaledTorsion, SupportCentreAndScaling) {
  const auto V = [](const Point& y) { return torsion_closed_form(y, BallDomain::unit_centered(y.dim), 0.5); };
  const double p = 3.0, a = 0.5, pre = 1.7;
  EXPECT_EQ(scaled_torsion(Point::axis(2, 0.9), 0.3, pre, p, a, V), 0.0);
  EXPECT_EQ(scaled_torsion(Point{0.31, 0.3}, 0.3, pre, p, a, V), 0.0);
  const double t = 0.2;
  EXPECT_DOUBLE_EQ(scaled_torsion(Point::axis(2, t), t, pre, p, a, V),
                   pre * std::pow(t, -(2 + 2 * a) / p) * V(Point(2)));
  const double r = scaled_torsion(Point::axis(2, 2 * t), 2 * t, pre, p, a, V) /
                   scaled_torsion(Point::axis(2, t), t, pre, p, a, V);
  EXPECT_NEAR(r, std::pow(2.0, -(2 + 2 * a) / p), 1e-14);
}

TEST(SupersolutionMargin, LargeMultiplierCertifies) {
  const auto P = params(2, 0.5, 3.0);
  const double cN = normalization_constant(2, 0.5);
  const double sigma0 = (2 + 2 * 0.5) / 3.0;
  std::vector<Point> samples;
  for (int i = 0; i < 200; ++i) samples.push_back(fbtest::random_in_ball(BallDomain::unit_shifted(2), 1.0));
  BarrierSpec b;
  b.sigma = sigma0;
  b.k = 10.0 * std::pow(std::max({1.0, std::abs(symbol_constant(sigma0, 2, 0.5).value), cN}), 1.0 / (3.0 - 1.0));
  EXPECT_GE(supersolution_margin(b, P, samples, cN), 0.0);
  b.k = 1e-6;
  EXPECT_LT(supersolution_margin(b, P, samples, cN), 0.0);
}

TEST(SupersolutionMargin, MatchesDirectEvaluation) {
  const auto P = params(2, 0.5, 3.0);
  const double cN = normalization_constant(2, 0.5);
  BarrierSpec b;
  b.sigma = 1.0;
  b.k = 0.8;
  EvaluableFunction U = phi_power_function(2, b.sigma);
  U.f = [&](const Point& y) { return b.k * phi_power(y, b.sigma); };
  U.decay_constant = b.k;
  for (int i = 0; i < 5; ++i) {
    const Point x = fbtest::random_in_ball(BallDomain::unit_shifted(2), 0.9);
    const double direct =
        frac_laplacian_point(U, x, P.alpha, cN) + std::pow(U(x), P.p) - gamma_source(x, 0.0, P, cN);
    EXPECT_NEAR(supersolution_margin(b, P, {x}, cN), direct, 1e-5 * std::abs(direct) + 1e-8);
  }
}

TEST(SupersolutionMargin, CriticalPowerBoundInThreeDimensions) {
  for (double a : {0.6, 0.8, 0.9, 0.99}) {
    const auto P = params(3, a, 5.0);
    const double cN = normalization_constant(3, a);
    BarrierSpec b;
    b.sigma = 5.0 / 5.0;
    b.k = std::pow(std::pow(4.0, 1.0 - a) * cN, 1.0 / 5.0);
    std::vector<Point> samples;
    for (int i = 0; i < 100; ++i) samples.push_back(fbtest::random_in_ball(BallDomain::unit_shifted(3), 1.0));
    EXPECT_GE(supersolution_margin(b, P, samples, cN), -1e-12) << a;
  }
}

TEST(SupersolutionMargin, RejectsExponentOutsideRange) {
  BarrierSpec b;
  b.sigma = 2.5;
  EXPECT_THROW(supersolution_margin(b, params(2, 0.5, 3.0), {Point::axis(2, 1.0)}, 1.0), DomainError);
}

TEST(MultiplierSearch, FiniteAboveThreshold) {
  for (double p : {1.7, 2.0, 3.0, 5.0}) {
    const auto P = params(2, 0.5, p);
    const double cN = normalization_constant(2, 0.5);
    std::vector<Point> samples;
    for (int i = 0; i < 60; ++i) samples.push_back(fbtest::random_in_ball(BallDomain::unit_shifted(2), 1.0));
    BarrierSpec b;
    b.sigma = (2.0 + 1.0) / p;
    const MultiplierSearch m = find_supersolution_multiplier(b, P, samples, cN);
    ASSERT_TRUE(m.found) << p;
    EXPECT_TRUE(std::isfinite(m.k));
    b.k = m.k;
    EXPECT_GE(supersolution_margin(b, P, samples, cN), 0.0);
  }
}
