#pragma once

// Closed-form kernels: the exterior sources Gamma_s, the mollifier family and
// its transform, the Green function of (-Delta)^a on a ball and the matching
// exterior Poisson kernel. Points are given in the problem frame; kernel
// formulas shift to ball-centered coordinates internally.

#include <array>
#include <cmath>
#include <functional>
#include <mutex>
#include <vector>
#include <numbers>
#include <optional>
#include <string>

#include "fracball/constants.hpp"
#include "fracball/errors.hpp"
#include "fracball/geometry.hpp"
#include "fracball/quadrature.hpp"

namespace fracball {

/// Gamma_s(x) = c_{N,a} |x + s e_N|^{-N-2a}.
inline double gamma_source(const Point& x, double s, const ProblemParams& params, double cN) {
  const Point y = x + Point::axis(x.dim, s);
  const double r2 = y.norm2();
  if (!(r2 > 0.0)) throw DomainError("gamma_source: x coincides with the singular point -s e_N");
  return cN * std::pow(r2, -0.5 * (x.dim + 2.0 * params.alpha));
}

// ---------------------------------------------------------------------------
// Mollifiers

enum class MollifierKind {
  polynomial,  // A (1 - 4|x|^2)^3 on |x| <= 1/2
  gaussian,    // A exp(-|x|^2 / (2 w^2)) (1 - 4|x|^2)^3, w = 0.15; alternative profile
};

inline const char* to_string(MollifierKind k) {
  return k == MollifierKind::polynomial ? "polynomial" : "gaussian";
}

namespace detail {

inline double bump_profile(MollifierKind k, double r) {
  if (r >= 0.5) return 0.0;
  const double t = 1.0 - 4.0 * r * r;
  const double poly = t * t * t;
  if (k == MollifierKind::polynomial) return poly;
  constexpr double w = 0.15;
  return std::exp(-r * r / (2.0 * w * w)) * poly;
}

// Mass normalization, by quadrature of the radial profile.
inline double bump_amplitude(MollifierKind k, int N) {
  static std::array<std::array<double, kMaxDim + 1>, 2> cache{};
  static std::once_flag once[2][kMaxDim + 1];
  const int ki = static_cast<int>(k);
  std::call_once(once[ki][N], [&] {
    QuadratureSpec q;
    q.abs_tol = 1e-15;
    q.rel_tol = 1e-13;
    auto f = [&](double r) { return bump_profile(k, r) * std::pow(r, N - 1); };
    const double m = integrate(f, 0.0, 0.5, q, {}, Rule::smooth).value;
    cache[ki][N] = 1.0 / (surface_area(N) * m);
  });
  return cache[ki][N];
}

}  // namespace detail

/// Unit-mass radial bump g_0.
inline double mollifier_profile(const Point& x, MollifierKind kind = MollifierKind::polynomial) {
  return detail::bump_amplitude(kind, x.dim) * detail::bump_profile(kind, x.norm());
}

/// g_n(x) = n^N g_0(n (x + s e_N)).
inline double mollifier(const Point& x, int n, double s, MollifierKind kind = MollifierKind::polynomial) {
  if (n < 1) throw DomainError("mollifier: n must be >= 1");
  const Point y = (x + Point::axis(x.dim, s)) * static_cast<double>(n);
  return std::pow(static_cast<double>(n), x.dim) * mollifier_profile(y, kind);
}

/// Smallest index whose mollifier support B_{1/(2n)}(-s e_N) fits in B_{s/2}(-s e_N).
inline int mollifier_threshold(double s) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("mollifier_threshold: s must lie in (0,1)");
  return static_cast<int>(std::ceil(1.0 / s - 1e-12));
}

/// c_{N,a} int g_n(y) |x-y|^{-N-2a} dy over the mollifier support.
///
/// Polar coordinates about -s e_N. For N = 3 the sphere average of
/// |v - rho w|^{-m} is closed form; for N = 2 it is a smooth periodic
/// integral handled by Gauss-Legendre since |v| >= 2 rho.
inline double mollified_transform(const Point& x, int n, double s, const ProblemParams& params, double cN,
                                  const QuadratureSpec& q = {},
                                  MollifierKind kind = MollifierKind::polynomial) {
  const int N = x.dim;
  if (!(s > 0.0 && s < 1.0)) throw DomainError("mollified_transform: s must lie in (0,1)");
  if (n < mollifier_threshold(s))
    throw DomainError("mollified_transform: n = " + std::to_string(n) +
                      " leaves the mollifier support overlapping the ball; need n >= " +
                      std::to_string(mollifier_threshold(s)));
  const BallDomain ball = BallDomain::unit_shifted(N);
  if (boundary_distance(ball, x) < -1e-12) throw DomainError("mollified_transform: x outside the ball");
  const double m = N + 2.0 * params.alpha;
  const double d = (x + Point::axis(N, s)).norm();
  const double amp = detail::bump_amplitude(kind, N);
  const double rho_max = 0.5 / n;

  auto sphere_avg = [&](double rho) {
    if (rho == 0.0) return surface_area(N) * std::pow(d, -m);
    if (N == 3)
      return 2.0 * std::numbers::pi / (d * rho * (m - 2.0)) *
             (std::pow(d - rho, 2.0 - m) - std::pow(d + rho, 2.0 - m));
    auto g = [&](double th) { return std::pow(d * d + rho * rho - 2.0 * d * rho * std::cos(th), -0.5 * m); };
    return 2.0 * gauss_integrate(g, 0.0, std::numbers::pi, 48);
  };
  auto radial = [&](double rho) {
    return std::pow(static_cast<double>(n), N) * amp * detail::bump_profile(kind, n * rho) *
           std::pow(rho, N - 1) * sphere_avg(rho);
  };
  return cN * integrate(radial, 0.0, rho_max, q, {}, Rule::smooth).value;
}

// ---------------------------------------------------------------------------
// Source specification

enum class SourceKind { dirac_transform, mollified, constant, custom };

struct SourceSpec {
  SourceKind kind = SourceKind::dirac_transform;
  double s = 0.0;
  int n = 1;
  double cN_alpha = 0.0;
  double constant_value = 1.0;
  MollifierKind mollifier_kind = MollifierKind::polynomial;
  std::function<double(const Point&)> custom;

  void validate() const {
    if (!(cN_alpha > 0.0)) throw DomainError("SourceSpec: cN_alpha must be positive");
    switch (kind) {
      case SourceKind::dirac_transform:
        if (!(s >= 0.0)) throw DomainError("SourceSpec: s must be >= 0");
        break;
      case SourceKind::mollified:
        if (!(s > 0.0 && s < 1.0)) throw DomainError("SourceSpec: mollified source needs s in (0,1)");
        if (n < mollifier_threshold(s)) throw DomainError("SourceSpec: mollifier index below threshold");
        break;
      case SourceKind::constant:
        break;
      case SourceKind::custom:
        if (!custom) throw DomainError("SourceSpec: custom source without callable");
        break;
    }
  }

  double operator()(const Point& x, const ProblemParams& params, const QuadratureSpec& q = {}) const {
    switch (kind) {
      case SourceKind::dirac_transform: return gamma_source(x, s, params, cN_alpha);
      case SourceKind::mollified: return mollified_transform(x, n, s, params, cN_alpha, q, mollifier_kind);
      case SourceKind::constant: return constant_value;
      case SourceKind::custom: return custom(x);
    }
    return 0.0;
  }
};

// ---------------------------------------------------------------------------
// Ball Green function

/// Green function of (-Delta)^a on B_R(c) with zero exterior data:
///   G(x,y) = kappa |x-y|^{2a-N} B_w(a, N/2 - a),  w = P / (P + |x-y|^2),
///   P = (R^2 - |x-c|^2)(R^2 - |y-c|^2) / R^2,
/// which is the t/(1+t) = w form of int_0^{P/|x-y|^2} t^{a-1} (1+t)^{-N/2} dt.
/// The incomplete Beta function is summed from its hypergeometric series,
/// directly for w <= 1/2 and through the reflection B(a,b) - B_{1-w}(b,a)
/// otherwise, so both series converge at least like 2^{-k}.
class BallGreenKernel {
 public:
  static constexpr int kTerms = 60;

  BallGreenKernel(const BallDomain& ball, double alpha) : ball_(ball), alpha_(alpha) {
    ball.validate();
    detail::check_alpha(alpha);
    const int N = ball.dim;
    a_ = alpha;
    b_ = 0.5 * N - alpha;
    kappa_ = std::tgamma(0.5 * N) /
             (std::pow(2.0, 2.0 * alpha) * std::pow(std::numbers::pi, 0.5 * N) * std::tgamma(alpha) *
              std::tgamma(alpha));
    beta_ab_ = std::exp(std::lgamma(a_) + std::lgamma(b_) - std::lgamma(a_ + b_));
    double pa = 1.0, pb = 1.0;  // (1-b)_k / k!, (1-a)_k / k!
    for (int k = 0; k < kTerms; ++k) {
      ca_[k] = pa / (a_ + k);
      cb_[k] = pb / (b_ + k);
      pa *= (k + 1.0 - b_) / (k + 1.0);
      pb *= (k + 1.0 - a_) / (k + 1.0);
    }
  }

  const BallDomain& ball() const { return ball_; }
  double alpha() const { return alpha_; }
  double kappa() const { return kappa_; }

  /// Kernel from |x-y|^2 and P; zero when P <= 0 (a point on or outside the sphere).
  double from_invariants(double D2, double P) const {
    if (!(P > 0.0)) return 0.0;
    const double S = P + D2;
    const double w = P / S;
    if (w <= 0.5) {
      return kappa_ * std::pow(D2, -b_) * std::pow(w, a_) * horner(ca_, w);
    }
    const double v = D2 / S;
    return kappa_ * (beta_ab_ * std::pow(D2, -b_) - std::pow(S, -b_) * horner(cb_, v));
  }

  /// P for a pair of points in the problem frame.
  double boundary_product(const Point& x, const Point& y) const {
    const double R2 = ball_.radius * ball_.radius;
    return (R2 - (x - ball_.center).norm2()) * (R2 - (y - ball_.center).norm2()) / R2;
  }

  /// Unchecked evaluation; x != y assumed.
  double operator()(const Point& x, const Point& y) const {
    return from_invariants((x - y).norm2(), boundary_product(x, y));
  }

  /// Coefficient of the |x-y|^{2a-N} singularity: G ~ singular_coefficient |x-y|^{2a-N}.
  double singular_coefficient() const { return kappa_ * beta_ab_; }

  /// Limit of G(x,y) - singular_coefficient |x-y|^{2a-N} as y -> x.
  double regular_diagonal(const Point& x) const {
    const double R = ball_.radius;
    const double rho = (R * R - (x - ball_.center).norm2()) / R;
    return -kappa_ / b_ * std::pow(rho, -2.0 * b_);
  }

 private:
  static double horner(const std::array<double, kTerms>& c, double z) {
    double s = 0.0;
    for (int k = kTerms - 1; k >= 0; --k) s = s * z + c[k];
    return s;
  }

  BallDomain ball_;
  double alpha_;
  double a_ = 0, b_ = 0, kappa_ = 0, beta_ab_ = 0;
  std::array<double, kTerms> ca_{}, cb_{};
};

namespace detail {

inline void check_green_pair(const Point& x, const Point& y, const BallDomain& ball) {
  if (!ball.contains(x) || !ball.contains(y))
    throw DomainError("green_kernel: points must lie strictly inside the ball");
  if (x == y) throw DomainError("green_kernel: x = y is the kernel singularity");
}

}  // namespace detail

inline double green_kernel(const Point& x, const Point& y, const BallDomain& ball, double alpha) {
  detail::check_green_pair(x, y, ball);
  return BallGreenKernel(ball, alpha)(x, y);
}

/// Same kernel with the inner integral done by adaptive quadrature after
/// t = u^{1/a}, which turns int_0^{r0} t^{a-1}(1+t)^{-N/2} dt into
/// (1/a) int_0^{r0^a} (1 + u^{1/a})^{-N/2} du. Slow; kept as a reference.
inline double green_kernel_quadrature(const Point& x, const Point& y, const BallDomain& ball, double alpha,
                                      const QuadratureSpec& q = {}) {
  detail::check_green_pair(x, y, ball);
  const BallGreenKernel k(ball, alpha);
  const int N = ball.dim;
  const double D2 = (x - y).norm2();
  const double r0 = k.boundary_product(x, y) / D2;
  auto f = [&](double u) { return std::pow(1.0 + std::pow(u, 1.0 / alpha), -0.5 * N); };
  const double inner = integrate(f, 0.0, std::pow(r0, alpha), q, {}, Rule::smooth).value / alpha;
  return k.kappa() * std::pow(D2, alpha - 0.5 * N) * inner;
}

/// Exterior Poisson kernel of the ball:
///   Gamma(N/2) pi^{-N/2-1} sin(pi a) [(R^2-|x|^2)/(|z|^2-R^2)]^a |x-z|^{-N}.
inline double poisson_kernel(const Point& x, const Point& z, const BallDomain& ball, double alpha) {
  ball.validate();
  detail::check_alpha(alpha);
  const double R2 = ball.radius * ball.radius;
  const double xr = (x - ball.center).norm2(), zr = (z - ball.center).norm2();
  if (!(xr < R2)) throw DomainError("poisson_kernel: x must lie strictly inside the ball");
  if (!(zr > R2)) throw DomainError("poisson_kernel: z must lie strictly outside the ball");
  const int N = ball.dim;
  const double C = std::tgamma(0.5 * N) * std::pow(std::numbers::pi, -0.5 * N - 1.0) *
                   std::sin(std::numbers::pi * alpha);
  return C * std::pow((R2 - xr) / (zr - R2), alpha) * std::pow((x - z).norm2(), -0.5 * N);
}

/// int_B G(x,y) f(y) dy by nested adaptive quadrature in polar coordinates
/// about x. Along each direction r = L v^{1/(2a)}, L the distance to the
/// sphere, which turns the r^{2a-1} behaviour of G r^{N-1} into a constant.
/// `toward` is a direction in which f is known to peak (a breakpoint).
inline double green_potential(const Point& x, const std::function<double(const Point&)>& f, const BallDomain& ball,
                              double alpha, const QuadratureSpec& q = {},
                              const std::optional<Point>& toward = std::nullopt) {
  ball.validate();
  detail::check_alpha(alpha);
  if (!ball.contains(x)) throw DomainError("green_potential: x must lie strictly inside the ball");
  const int N = ball.dim;
  const BallGreenKernel G(ball, alpha);
  const Point xc = x - ball.center;
  const double c0 = xc.norm2() - ball.radius * ball.radius;
  const double e = 1.0 / (2.0 * alpha);
  const QuadratureSpec qi = q.tightened(1e-2), qm = q.tightened(1e-1);

  auto ray = [&](const Point& w) {
    const double b = xc.dot(w);
    const double L = -b + std::sqrt(b * b - c0);
    auto g = [&](double v) {
      if (v <= 0.0) return 0.0;
      const double r = L * std::pow(v, e);
      const Point y = x + w * r;
      return G(x, y) * f(y) * std::pow(r, N - 1) * L * e * std::pow(v, e - 1.0);
    };
    return integrate(g, 0.0, 1.0, qi).value;
  };
  const double pi = std::numbers::pi;
  if (N == 2) {
    std::vector<double> brk;
    if (toward) {
      const Point d = *toward - x;
      double th = std::atan2(d[1], d[0]);
      if (th < 0.0) th += 2.0 * pi;
      if (th > 0.0 && th < 2.0 * pi) brk.push_back(th);
    }
    auto outer = [&](double th) {
      Point w(2);
      w[0] = std::cos(th);
      w[1] = std::sin(th);
      return ray(w);
    };
    return integrate(outer, 0.0, 2.0 * pi, qm, brk).value;
  }
  // N = 3: polar angle from the axis direction `toward - x` (or e_N).
  Point ax = toward ? *toward - x : Point::axis(3, 1.0);
  ax = ax * (1.0 / ax.norm());
  const auto fr = detail::frame_along(ax);
  auto outer = [&](double th) {
    auto mid = [&](double ph) {
      const Point w = fr[0] * std::cos(th) + (fr[1] * std::cos(ph) + fr[2] * std::sin(ph)) * std::sin(th);
      return ray(w);
    };
    return std::sin(th) * integrate(mid, 0.0, 2.0 * pi, qm).value;
  };
  return integrate(outer, 0.0, pi, q).value;
}

}  // namespace fracball
