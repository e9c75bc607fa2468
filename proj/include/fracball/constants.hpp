#pragma once

// Analytic constants of the integral fractional Laplacian:
//   c_{N,a}    = ( int_{R^N} (1 - cos z_1) / |z|^{N+2a} dz )^{-1}
//   c(sigma,a) : (-Delta)^a |x|^{-sigma} = c(sigma,a) |x|^{-sigma-2a}
// Both are computed from their defining integrals by adaptive quadrature.

#include <cmath>
#include <numbers>
#include <string>

#include "fracball/errors.hpp"
#include "fracball/quadrature.hpp"

namespace fracball {

namespace detail {

// |S^{k-1}|, the measure of the unit sphere in R^k (k >= 1; |S^0| = 2).
inline double sphere_measure(int k) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(0.5 * k);
}

inline void check_dim(int N) {
  if (N < 2) throw DomainError("dimension N must be >= 2, got " + std::to_string(N));
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("order alpha must lie in (0,1), got " + std::to_string(alpha));
}

}  // namespace detail

/// Measure of the unit sphere S^{N-1} in R^N.
inline double surface_area(int N) {
  detail::check_dim(N);
  return detail::sphere_measure(N);
}

/// Lebesgue measure of the unit ball in R^N.
inline double ball_volume(int N) {
  detail::check_dim(N);
  return std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N + 1.0);
}

struct ConstantValue {
  double value = 0.0;
  double est_error = 0.0;
};

/// Normalization c_{N,alpha} with an error estimate.
///
/// The N-dimensional integral factors in polar coordinates into
///   (int_{S^{N-1}} |w_1|^{2a} dw) * (int_0^inf (1 - cos u) u^{-1-2a} du).
/// The radial part is split at u = 1 (the u^{1-2a} endpoint singularity is
/// removed by u = v^{1/(2-2a)}) and at R = 2 pi m >= outer_cutoff, beyond
/// which the power tail is exact and the cosine tail is summed from its
/// asymptotic integration-by-parts series.
inline ConstantValue normalization_constant_with_error(int N, double alpha,
                                                       const QuadratureSpec& q = {}) {
  detail::check_dim(N);
  detail::check_alpha(alpha);
  q.validate();
  const double pi = std::numbers::pi;
  const QuadratureSpec qt = q.tightened(1e-3);

  // Angular factor, reduced to the polar angle from the z_1 axis.
  auto ang = [&](double th) {
    return std::pow(std::cos(th), 2.0 * alpha) * std::pow(std::sin(th), N - 2);
  };
  const QuadResult a_half = integrate(ang, 0.0, 0.5 * pi, qt);
  const double a_fac = 2.0 * detail::sphere_measure(N - 1);
  const double A = a_fac * a_half.value;
  const double A_err = a_fac * a_half.abs_error;

  // (1 - cos u)/u^2 without cancellation.
  auto h = [](double u) {
    if (u < 1e-4) return 0.5 - u * u / 24.0;
    const double s = std::sin(0.5 * u);
    return 2.0 * s * s / (u * u);
  };
  const double k = 1.0 / (2.0 - 2.0 * alpha);
  const QuadResult j1 = integrate([&](double v) { return k * h(std::pow(v, k)); }, 0.0, 1.0, qt);

  const int periods = static_cast<int>(std::ceil(q.outer_cutoff / (2.0 * pi)));
  const double R = 2.0 * pi * periods;
  std::vector<double> brk;
  for (int m = 1; m < periods; ++m) brk.push_back(2.0 * pi * m);
  auto mid = [&](double u) {
    const double s = std::sin(0.5 * u);
    return 2.0 * s * s * std::pow(u, -1.0 - 2.0 * alpha);
  };
  const QuadResult j2 = integrate(mid, 1.0, R, qt, brk);

  // int_R^inf cos(u) u^{-b} du with sin R = 0, cos R = 1:
  //   b R^{-b-1} - b(b+1)(b+2) R^{-b-3} + ...
  const double b = 1.0 + 2.0 * alpha;
  double cos_tail = 0.0, coef = b, sign = 1.0, last = 0.0;
  for (int m = 0; m < 5; ++m) {
    last = sign * coef * std::pow(R, -b - 1.0 - 2.0 * m);
    cos_tail += last;
    coef *= (b + 2.0 * m + 1.0) * (b + 2.0 * m + 2.0);
    sign = -sign;
  }
  const double j3 = std::pow(R, -2.0 * alpha) / (2.0 * alpha) - cos_tail;

  const double J = j1.value + j2.value + j3;
  const double J_err = j1.abs_error + j2.abs_error + std::abs(last);
  const double c = 1.0 / (A * J);
  const double rel = A_err / A + J_err / J + 8.0 * std::numeric_limits<double>::epsilon();
  return {c, c * rel};
}

/// c_{N,alpha} from its defining integral.
inline double normalization_constant(int N, double alpha, const QuadratureSpec& q = {}) {
  return normalization_constant_with_error(N, alpha, q).value;
}

struct SymbolValue {
  double sigma = 0.0;
  double alpha = 0.0;
  int dim = 0;
  double value = 0.0;
  double est_error = 0.0;
};

/// c(sigma, alpha) = -(c_{N,a}/2) int_{R^N} (|z+e|^{-s} + |z-e|^{-s} - 2) / |z|^{N+2a} dz.
///
/// Regions: |z| < 1/2 with the exact quadratic Taylor term of the symmetric
/// numerator subtracted and added back in closed form; the shell
/// 1/2 < |z| < 3/2 minus the two balls B_{1/2}(+-e); those two balls in polar
/// coordinates centred on +-e (where |z-+e|^{-s} is an integrable radial
/// power); 3/2 < |z| < R; and the analytic tail |z| > R.
inline SymbolValue symbol_constant(double sigma, int N, double alpha, const QuadratureSpec& q = {}) {
  detail::check_dim(N);
  detail::check_alpha(alpha);
  q.validate();
  if (!(sigma >= 0.0) || !(sigma < N))
    throw DomainError("symbol_constant: sigma must lie in [0, N); the integral diverges as sigma -> N");
  SymbolValue out{sigma, alpha, N, 0.0, 0.0};
  if (sigma == 0.0) return out;

  const double pi = std::numbers::pi;
  const double s_sphere = detail::sphere_measure(N);
  const double s_equator = detail::sphere_measure(N - 1);
  const double beta = N + 2.0 * alpha;
  const QuadratureSpec qin = q.tightened(1e-5);
  InnerLog log;

  auto sin_pow = [N](double th) { return N == 2 ? 1.0 : std::pow(std::sin(th), N - 2); };

  // |z +- e|^{-sigma} - 1 for |z| = r, cos(angle to e) = t, without cancellation.
  auto shifted = [sigma](double r, double t, double sgn) {
    return std::expm1(-0.5 * sigma * std::log1p(r * r + 2.0 * sgn * r * t));
  };

  // Region A: 0 < |z| < 1/2.
  const double r_small = 1e-3;
  auto inner_a = [&](double r) {
    auto g = [&](double th) {
      const double t = std::cos(th);
      const double num = shifted(r, t, 1.0) + shifted(r, t, -1.0);
      const double quad = r * r * sigma * (-1.0 + (sigma + 2.0) * t * t);
      return (num - quad) * sin_pow(th);
    };
    QuadratureSpec qi = qin;
    qi.abs_tol = 1e-15 * r;
    const QuadResult res = integrate_nothrow(g, 0.0, 0.5 * pi, qi, {}, Rule::smooth);
    log.record(res);
    return 2.0 * s_equator * res.value;
  };
  const QuadResult ra =
      integrate([&](double r) { return std::pow(r, -1.0 - 2.0 * alpha) * inner_a(r); }, r_small, 0.5, q);
  // Below r_small the remainder is quartic in r.
  const double ra_small = inner_a(r_small) * std::pow(r_small, -2.0 * alpha) / (4.0 - 2.0 * alpha);
  const double addback = s_sphere * sigma * (sigma + 2.0 - N) / N * std::pow(0.5, 2.0 - 2.0 * alpha) /
                         (2.0 - 2.0 * alpha);

  // Region B: shell 1/2 < |z| < 3/2 outside the caps |z -+ e| < 1/2.
  auto numerator = [sigma](double r, double t) {
    const double a = 1.0 + r * r;
    return std::pow(a + 2.0 * r * t, -0.5 * sigma) + std::pow(a - 2.0 * r * t, -0.5 * sigma) - 2.0;
  };
  auto inner_b = [&](double r) {
    const double ct = std::min(1.0, (r * r + 0.75) / (2.0 * r));
    const double th0 = std::acos(ct);
    auto g = [&](double th) { return numerator(r, std::cos(th)) * sin_pow(th); };
    const QuadResult res = integrate_nothrow(g, th0, 0.5 * pi, qin, {}, Rule::smooth);
    log.record(res);
    return 2.0 * s_equator * res.value;
  };
  const double brk_b[] = {1.0};
  const QuadResult rb =
      integrate([&](double r) { return std::pow(r, -1.0 - 2.0 * alpha) * inner_b(r); }, 0.5, 1.5, q, brk_b);

  // Region C: 3/2 < |z| < R.
  const double R = q.outer_cutoff;
  auto inner_c = [&](double r) {
    auto g = [&](double th) { return numerator(r, std::cos(th)) * sin_pow(th); };
    const QuadResult res = integrate_nothrow(g, 0.0, 0.5 * pi, qin, {}, Rule::smooth);
    log.record(res);
    return 2.0 * s_equator * res.value;
  };
  const double brk_c[] = {3.0, 8.0};
  const QuadResult rc = integrate([&](double r) { return std::pow(r, -1.0 - 2.0 * alpha) * inner_c(r); },
                                  1.5, R, q, brk_c, Rule::smooth);

  // Tail |z| > R: spherical mean of |z +- e|^{-s} is r^{-s}(1 + s(s+2-N)/(2N) r^{-2} + O(r^{-4})).
  const double tail =
      s_sphere * (2.0 * std::pow(R, -sigma - 2.0 * alpha) / (sigma + 2.0 * alpha) +
                  sigma * (sigma + 2.0 - N) / N * std::pow(R, -sigma - 2.0 * alpha - 2.0) /
                      (sigma + 2.0 * alpha + 2.0) -
                  2.0 * std::pow(R, -2.0 * alpha) / (2.0 * alpha));
  const double tail_err = s_sphere * std::abs(sigma * sigma * sigma) * std::pow(R, -sigma - 2.0 * alpha - 4.0);

  // Caps: z = e + rho w, rho < 1/2; the ball around -e contributes the same by symmetry.
  auto inner_cap = [&](double rho) {
    auto g = [&](double ph) {
      const double c = std::cos(ph);
      const double zz = 1.0 + 2.0 * rho * c + rho * rho;
      const double far = std::pow(4.0 + 4.0 * rho * c + rho * rho, -0.5 * sigma);
      const double near = std::pow(rho, -sigma);
      return (far + near - 2.0) * std::pow(zz, -0.5 * beta) * sin_pow(ph);
    };
    const QuadResult res = integrate_nothrow(g, 0.0, pi, qin, {}, Rule::smooth);
    log.record(res);
    return s_equator * res.value;
  };
  const QuadResult rcap =
      integrate([&](double rho) { return std::pow(rho, N - 1) * inner_cap(rho); }, 0.0, 0.5, q);
  log.raise_if_failed("symbol_constant", 0.0, 0.0);

  const double total = ra.value + ra_small + addback + rb.value + rc.value + tail + 2.0 * rcap.value;
  const double magnitude = std::abs(ra.value) + std::abs(addback) + std::abs(rb.value) +
                           std::abs(rc.value) + std::abs(tail) + 2.0 * std::abs(rcap.value);
  const double quad_err = ra.abs_error + rb.abs_error + rc.abs_error + 2.0 * rcap.abs_error + tail_err +
                          std::abs(ra_small) * 1e-2 + magnitude * (qin.rel_tol + 1e-13);

  const ConstantValue cn = normalization_constant_with_error(N, alpha, q);
  out.value = -0.5 * cn.value * total;
  out.est_error = 0.5 * cn.value * quad_err + std::abs(out.value) * cn.est_error / cn.value;
  return out;
}

/// Limit of c(sigma, alpha) as alpha -> 1^-: the classical symbol (N-2-sigma) sigma.
inline double symbol_constant_limit(double sigma, int N) {
  detail::check_dim(N);
  if (!(sigma >= 0.0) || !(sigma < N)) throw DomainError("symbol_constant_limit: sigma must lie in [0, N)");
  return (N - 2.0 - sigma) * sigma;
}

}  // namespace fracball
