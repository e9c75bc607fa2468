#pragma once

// Pointwise evaluation of the integral fractional Laplacian, the radial
// powers Phi_sigma, scaled torsion barriers and supersolution certificates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "fracball/constants.hpp"
#include "fracball/errors.hpp"
#include "fracball/geometry.hpp"
#include "fracball/quadrature.hpp"

namespace fracball {

/// A function on R^N together with what the integrator needs to know about it.
struct EvaluableFunction {
  std::function<double(const Point&)> f;
  /// Radius around x inside which f is C^2 (second differences are trusted).
  std::function<double(const Point&)> smoothness_radius;

  /// f depends only on |y - center|. Enables the axisymmetric angular reduction.
  std::optional<Point> center;
  /// f vanishes for |y - center| > support_radius (center required).
  std::optional<double> support_radius;
  /// f ~ decay_constant |y - center|^{-decay_exponent} at infinity.
  std::optional<double> decay_constant;
  double decay_exponent = 0.0;
  /// f is singular at center; a radial breakpoint is placed there.
  bool singular_at_center = false;

  double operator()(const Point& y) const { return f(y); }
};

inline double phi_power(const Point& x, double sigma) {
  const double r2 = x.norm2();
  if (!(r2 > 0.0)) throw DomainError("phi_power: x = 0 is singular");
  return std::pow(r2, -0.5 * sigma);
}

/// Phi_sigma as an EvaluableFunction, smooth on B_{|x|}(x).
inline EvaluableFunction phi_power_function(int N, double sigma) {
  EvaluableFunction e;
  e.f = [sigma](const Point& y) {
    const double r2 = y.norm2();
    return r2 > 0.0 ? std::pow(r2, -0.5 * sigma) : std::numeric_limits<double>::infinity();
  };
  e.smoothness_radius = [](const Point& x) { return x.norm(); };
  e.center = Point(N);
  e.decay_constant = 1.0;
  e.decay_exponent = sigma;
  e.singular_at_center = sigma > 0.0;
  return e;
}

/// Torsion of B_R(c): gamma_{N,a} (R^2 - |x-c|^2)_+^a, the solution of
/// (-Delta)^a V = 1 in the ball with V = 0 outside.
inline double torsion_closed_form(const Point& x, const BallDomain& ball, double alpha) {
  const int N = ball.dim;
  const double R2 = ball.radius * ball.radius;
  const double q = R2 - (x - ball.center).norm2();
  if (q <= 0.0) return 0.0;
  const double gam = std::tgamma(0.5 * N) /
                     (std::pow(2.0, 2.0 * alpha) * std::tgamma(0.5 * N + alpha) * std::tgamma(1.0 + alpha));
  return gam * std::pow(q, alpha);
}

inline EvaluableFunction torsion_function(const BallDomain& ball, double alpha) {
  EvaluableFunction e;
  e.f = [ball, alpha](const Point& y) { return torsion_closed_form(y, ball, alpha); };
  e.smoothness_radius = [ball](const Point& x) { return std::max(boundary_distance(ball, x), 0.0); };
  e.center = ball.center;
  e.support_radius = ball.radius;
  return e;
}

namespace detail {

// Sphere integrals of g(omega) for the radius-r shell about x, where
// g(omega) = h(x + r omega). `symmetric` evaluates h(x + r w) + h(x - r w) - 2 h(x).
class ShellIntegrator {
 public:
  ShellIntegrator(const EvaluableFunction& fn, const Point& x, const QuadratureSpec& q, InnerLog& log)
      : fn_(fn), x_(x), q_(q), log_(log), N_(x.dim) {
    if (fn.center) {
      const Point v = x - *fn.center;
      d_ = v.norm();
      frame_ = frame_along(v);
    } else {
      for (int i = 0; i < N_; ++i) {
        frame_[i] = Point(N_);
        frame_[i][i] = 1.0;
      }
    }
  }

  // int_{S^{N-1}} h(x + r w) dw
  double plain(double r) const {
    if (fn_.center && d_ > 0.0) return plain_radial(r);
    return shell(r, [&](const Point& w) { return fn_(x_ + w * r); });
  }

  // int_{S^{N-1}} (h(x + r w) + h(x - r w) - 2 h(x)) dw, computed on a half sphere.
  double symmetric(double r, double fx) const {
    auto g = [&](const Point& w) { return fn_(x_ + w * r) + fn_(x_ - w * r) - 2.0 * fx; };
    return shell(r, g, true);
  }

 private:
  // Same shell integral in terms of rho = |y - center| in [|d-r|, d+r], so a
  // singularity at the center becomes an endpoint singularity.
  //   N = 3: (2 pi / (d r)) int h(rho) rho drho
  //   N = 2: 4 int_0^{pi/2} h(rho(psi)) dpsi, rho^2 = a^2 + (b^2 - a^2) sin^2 psi
  double plain_radial(double r) const {
    const Point& c = *fn_.center;
    const Point& e = frame_[0];
    auto h = [&](double rho) { return fn_(c + e * rho); };
    const double a = std::abs(d_ - r), b = d_ + r;
    const double R = fn_.support_radius ? *fn_.support_radius : -1.0;
    double total = 0.0;
    auto add = [&](auto&& f, double lo, double hi, std::vector<double> br) {
      const QuadResult res = integrate_nothrow(f, lo, hi, q_, br);
      log_.record(res);
      total += res.value;
    };
    if (N_ == 3) {
      // rho = a e^v near a small lower endpoint; rho^2 h(rho) is then smooth in v.
      const double rs = std::min(b, 4.0 * a);
      if (a > 0.0 && rs > a) {
        std::vector<double> br;
        if (R > a && R < rs) br.push_back(std::log(R / a));
        add([&](double v) { const double rho = a * std::exp(v); return h(rho) * rho * rho; }, 0.0,
            std::log(rs / a), br);
      }
      std::vector<double> br;
      if (R > 0.0) br.push_back(R);
      add([&](double rho) { return h(rho) * rho; }, a > 0.0 ? std::max(a, rs) : 0.0, b, br);
      return total * 2.0 * std::numbers::pi / (d_ * r);
    }
    const double span = b * b - a * a;
    const double sq = std::sqrt(span);
    // psi in [0, pi/4]: sin(psi) = (a / sq) sinh(tau) gives rho = a cosh(tau).
    const double psi_s = 0.25 * std::numbers::pi;
    if (a > 0.0) {
      const double tau1 = std::asinh(std::sin(psi_s) * sq / a);
      std::vector<double> br;
      if (R > a) br.push_back(std::acosh(R / a));
      add(
          [&](double tau) {
            const double sp = a / sq * std::sinh(tau);
            const double rho = a * std::cosh(tau);
            return h(rho) * rho / (sq * std::sqrt(1.0 - sp * sp));
          },
          0.0, tau1, br);
    } else {
      add([&](double psi) { return h(sq * std::sin(psi)); }, 0.0, psi_s, {});
    }
    std::vector<double> br;
    if (R > 0.0) {
      const double s2 = (R * R - a * a) / span;
      if (s2 > 0.0 && s2 < 1.0) br.push_back(std::asin(std::sqrt(s2)));
    }
    add(
        [&](double psi) {
          const double sp = std::sin(psi);
          return h(std::sqrt(a * a + span * sp * sp));
        },
        psi_s, 0.5 * std::numbers::pi, br);
    return 4.0 * total;
  }

  template <class G>
  double shell(double r, G&& g, bool half = false) const {
    const Point& e = frame_[0];
    const Point& p = frame_[1];
    if (fn_.center) {
      if (d_ == 0.0) {
        const double v = g(e);
        return half ? 0.5 * surface_area(N_) * v : surface_area(N_) * v;
      }
      // Axisymmetric about e: w = cos(t) e + sin(t) p.
      const double lo = 0.0, hi = half ? 0.5 * std::numbers::pi : std::numbers::pi;
      std::vector<double> br;
      if (fn_.support_radius) {
        const double R = *fn_.support_radius;
        const double c = (R * R - d_ * d_ - r * r) / (2.0 * d_ * r);
        if (c > -1.0 && c < 1.0) {
          br.push_back(std::acos(c));
          if (half) br.push_back(std::numbers::pi - std::acos(c));
        }
      }
      auto integrand = [&](double t) {
        const double wt = N_ == 2 ? 2.0 : 2.0 * std::numbers::pi * std::sin(t);
        return wt * g(e * std::cos(t) + p * std::sin(t));
      };
      QuadResult res = integrate_nothrow(integrand, lo, hi, q_, br);
      log_.record(res);
      return half ? 2.0 * res.value : res.value;
    }
    if (N_ == 2) {
      const double hi = half ? std::numbers::pi : 2.0 * std::numbers::pi;
      auto integrand = [&](double t) { return g(e * std::cos(t) + p * std::sin(t)); };
      QuadResult res = integrate_nothrow(integrand, 0.0, hi, q_, {}, Rule::smooth);
      log_.record(res);
      return half ? 2.0 * res.value : res.value;
    }
    // N = 3, full sphere: polar angle about e, azimuth about it.
    const Point& c3 = frame_[2];
    const QuadratureSpec qi = q_.tightened(0.1);
    auto outer = [&](double t) {
      const double st = std::sin(t), ct = std::cos(t);
      auto inner = [&](double ph) { return g(e * ct + p * (st * std::cos(ph)) + c3 * (st * std::sin(ph))); };
      QuadResult ri = integrate_nothrow(inner, 0.0, 2.0 * std::numbers::pi, qi, {}, Rule::smooth);
      log_.record(ri);
      return st * ri.value;
    };
    const double hi = half ? 0.5 * std::numbers::pi : std::numbers::pi;
    QuadResult res = integrate_nothrow(outer, 0.0, hi, q_, {}, Rule::smooth);
    log_.record(res);
    return half ? 2.0 * res.value : res.value;
  }

  const EvaluableFunction& fn_;
  Point x_;
  const QuadratureSpec& q_;
  InnerLog& log_;
  int N_;
  double d_ = 0.0;
  std::array<Point, 3> frame_;
};

}  // namespace detail

/// (-Delta)^a f(x) = c_{N,a} PV int (f(x) - f(z)) / |x-z|^{N+2a} dz.
///
/// With delta half the smoothness radius the integral splits into
///   -(1/2) int_{|z|<delta} (f(x+z) + f(x-z) - 2 f(x)) |z|^{-N-2a} dz
///   + f(x) |S| delta^{-2a} / (2a) - int_{|z|>delta} f(x+z) |z|^{-N-2a} dz,
/// each done as a radial integral of shell integrals. The outer radial range
/// ends at the support edge, or at a cutoff beyond which a two-term
/// expansion of the decay law is integrated exactly.
inline double frac_laplacian_point(const EvaluableFunction& fn, const Point& x, double alpha, double cN,
                                   const QuadratureSpec& q = {}) {
  q.validate();
  detail::check_alpha(alpha);
  if (!fn.f || !fn.smoothness_radius) throw DomainError("frac_laplacian_point: incomplete function");
  const int N = x.dim;
  const double rho = fn.smoothness_radius(x);
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw DomainError("frac_laplacian_point: smoothness radius must be positive at x");
  if (!fn.support_radius && !fn.decay_constant)
    throw DomainError("frac_laplacian_point: function needs a support radius or a decay law");
  if (fn.support_radius && !fn.center) throw DomainError("frac_laplacian_point: support radius needs a center");

  const double delta = 0.5 * rho;
  const double m = 1.0 + 2.0 * alpha;
  const double fx = fn(x);
  const double S = surface_area(N);
  InnerLog log;
  const QuadratureSpec qin = q.tightened(1e-2);
  detail::ShellIntegrator shells(fn, x, qin, log);

  // Inner symmetric part; below r_min the shell average is quadratic in r.
  const double r_min = 1e-3 * delta;
  auto inner = [&](double r) { return std::pow(r, -m) * shells.symmetric(r, fx); };
  const QuadResult ri = integrate_nothrow(inner, r_min, delta, q);
  log.record(ri);
  const double s2_min = shells.symmetric(r_min, fx);
  const double inner_small = s2_min / (r_min * r_min) * std::pow(r_min, 2.0 - 2.0 * alpha) / (2.0 - 2.0 * alpha);
  const double inner_total = -0.5 * (ri.value + inner_small);

  // Outer part.
  double d = 0.0;
  if (fn.center) d = (x - *fn.center).norm();
  std::vector<double> br;
  double r_out;
  double tail = 0.0;
  if (fn.support_radius) {
    const double R = *fn.support_radius;
    r_out = d + R;
    if (d > 0.0) br.push_back(std::abs(d - R));
  } else {
    r_out = std::max(q.outer_cutoff, 8.0 * (d + delta));
    const double C = *fn.decay_constant, beta = fn.decay_exponent;
    const double a2 = 2.0 * alpha;
    tail = S * C *
           (std::pow(r_out, -beta - a2) / (beta + a2) +
            beta * (beta + 2.0 - N) / (2.0 * N) * d * d * std::pow(r_out, -beta - a2 - 2.0) / (beta + a2 + 2.0));
  }
  if (fn.singular_at_center && d > 0.0) br.push_back(d);
  double outer_val = 0.0;
  if (r_out > delta) {
    auto outer = [&](double r) { return std::pow(r, -m) * shells.plain(r); };
    // Geometric breakpoints keep qagp's initial partition sensible on long ranges.
    for (double b = 2.0 * delta; b < r_out; b *= 4.0) br.push_back(b);
    const QuadResult ro = integrate_nothrow(outer, delta, r_out, q, br);
    log.record(ro);
    outer_val = ro.value;
  }
  const double outer_total = fx * S * std::pow(delta, -2.0 * alpha) / (2.0 * alpha) - outer_val - tail;
  const double value = cN * (inner_total + outer_total);
  log.raise_if_failed("frac_laplacian_point", value, std::abs(value) * log.max_rel_error);
  return value;
}

// ---------------------------------------------------------------------------
// Barriers

enum class BarrierKind { power, scaled_torsion };

struct BarrierSpec {
  BarrierKind kind = BarrierKind::power;
  double k = 1.0;
  double sigma = 1.0;
  double t = 0.5;
  double prefactor = 1.0;

  void validate(int N) const {
    if (!(k > 0.0)) throw DomainError("BarrierSpec: k must be positive");
    if (kind == BarrierKind::power && !(sigma > 0.0 && sigma < N))
      throw DomainError("BarrierSpec: power barrier needs sigma in (0, N)");
    if (kind == BarrierKind::scaled_torsion && !(t > 0.0 && t < 1.0))
      throw DomainError("BarrierSpec: torsion scale t must lie in (0,1)");
  }
};

/// sigma_0 = (N + 2a) / p.
inline double barrier_exponent(int N, double alpha, double p) { return (N + 2.0 * alpha) / p; }

/// prefactor t^{-(N+2a)/p} V_B((x - t e_N)/t); zero outside B_t(t e_N).
inline double scaled_torsion(const Point& x, double t, double prefactor, double p, double alpha,
                             const std::function<double(const Point&)>& torsion) {
  const int N = x.dim;
  const Point y = (x - Point::axis(N, t)) * (1.0 / t);
  if (y.norm2() >= 1.0) return 0.0;
  return prefactor * std::pow(t, -(N + 2.0 * alpha) / p) * torsion(y);
}

/// min over samples of (-Delta)^a U + U^p - Gamma_0.
inline double supersolution_margin(const BarrierSpec& b, const ProblemParams& params,
                                   const std::vector<Point>& samples, double cN, const QuadratureSpec& q = {}) {
  params.validate();
  b.validate(params.dim);
  const int N = params.dim;
  const double a = params.alpha;
  double c_sym = 0.0;
  if (b.kind == BarrierKind::power) c_sym = symbol_constant(b.sigma, N, a, q).value;
  double worst = std::numeric_limits<double>::infinity();
  for (const Point& x : samples) {
    const double r = x.norm();
    if (!(r > 0.0)) throw DomainError("supersolution_margin: sample at the origin");
    const double gamma0 = cN * std::pow(r, -(N + 2.0 * a));
    double lu, u;
    if (b.kind == BarrierKind::power) {
      u = b.k * std::pow(r, -b.sigma);
      lu = b.k * c_sym * std::pow(r, -b.sigma - 2.0 * a);
    } else {
      const double scale = b.k * b.prefactor * std::pow(b.t, -(N + 2.0 * a) / params.p);
      BallDomain small{N, Point::axis(N, b.t), b.t};
      EvaluableFunction vt = torsion_function(small, a);
      auto base = vt.f;
      vt.f = [base, scale](const Point& y) { return scale * base(y); };
      u = vt(x);
      if (small.contains(x))
        lu = scale * std::pow(b.t, -2.0 * a);  // (-Delta)^a of the scaled torsion is constant inside
      else {
        vt.smoothness_radius = [small](const Point& z) { return std::abs(boundary_distance(small, z)); };
        lu = frac_laplacian_point(vt, x, a, cN, q);
      }
    }
    worst = std::min(worst, lu + std::pow(u, params.p) - gamma0);
  }
  return worst;
}

struct MultiplierSearch {
  double k = 0.0;      // smallest certified multiplier found
  double margin = 0.0; // margin at k
  int evaluations = 0;
  bool found = false;
};

/// Doubling from k = 1 until the margin is nonnegative, then bisection.
/// The smallest certified k among the tested values is returned.
inline MultiplierSearch find_supersolution_multiplier(BarrierSpec b, const ProblemParams& params,
                                                      const std::vector<Point>& samples, double cN,
                                                      const QuadratureSpec& q = {}, double rel_tol = 1e-3,
                                                      int max_doublings = 60) {
  MultiplierSearch out;
  auto margin = [&](double k) {
    b.k = k;
    ++out.evaluations;
    return supersolution_margin(b, params, samples, cN, q);
  };
  double hi = 1.0, m_hi = margin(hi);
  int it = 0;
  while (m_hi < 0.0 && it++ < max_doublings) {
    hi *= 2.0;
    m_hi = margin(hi);
  }
  if (m_hi < 0.0) return out;
  out.found = true;
  out.k = hi;
  out.margin = m_hi;
  double lo = hi == 1.0 ? 1.0 : 0.5 * hi;
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    const double mm = margin(mid);
    if (mm >= 0.0) {
      hi = mid;
      out.k = mid;
      out.margin = mm;
    } else {
      lo = mid;
    }
  }
  return out;
}

}  // namespace fracball
