#pragma once

// Points, the ball B_R(c), graded polar meshes and the small geometric
// predicates used throughout (boundary distance, axial cone, axial coords).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fracball/constants.hpp"
#include "fracball/errors.hpp"
#include "fracball/quadrature.hpp"

namespace fracball {

inline constexpr int kMaxDim = 3;

/// Point in R^N, N in {2, 3}. The last coordinate is the axial one (x_N).
struct Point {
  std::array<double, kMaxDim> c{};
  int dim = 0;

  Point() = default;
  explicit Point(int n) : dim(n) { check(n); }
  Point(std::initializer_list<double> xs) : dim(static_cast<int>(xs.size())) {
    check(dim);
    int i = 0;
    for (double v : xs) c[i++] = v;
  }
  static Point axis(int n, double t) {
    Point p(n);
    p.c[n - 1] = t;
    return p;
  }

  double& operator[](int i) { return c[i]; }
  double operator[](int i) const { return c[i]; }
  double last() const { return c[dim - 1]; }
  std::span<const double> coords() const { return {c.data(), static_cast<size_t>(dim)}; }

  Point operator+(const Point& o) const { return zip(o, 1.0); }
  Point operator-(const Point& o) const { return zip(o, -1.0); }
  Point operator*(double s) const {
    Point r = *this;
    for (int i = 0; i < dim; ++i) r.c[i] *= s;
    return r;
  }
  double dot(const Point& o) const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += c[i] * o.c[i];
    return s;
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  bool operator==(const Point& o) const { return dim == o.dim && c == o.c; }

 private:
  static void check(int n) {
    if (n < 2 || n > kMaxDim) throw DomainError("Point: dimension must be 2 or 3");
  }
  Point zip(const Point& o, double s) const {
    if (o.dim != dim) throw DomainError("Point: dimension mismatch");
    Point r = *this;
    for (int i = 0; i < dim; ++i) r.c[i] += s * o.c[i];
    return r;
  }
};

inline double distance(const Point& a, const Point& b) { return (a - b).norm(); }

inline std::ostream& operator<<(std::ostream& os, const Point& p) {
  os << '(';
  for (int i = 0; i < p.dim; ++i) os << (i ? ", " : "") << p[i];
  return os << ')';
}

struct BallDomain {
  int dim = 2;
  Point center;
  double radius = 1.0;

  /// B_1(e_N), the ball whose boundary touches the origin.
  static BallDomain unit_shifted(int n) { return {n, Point::axis(n, 1.0), 1.0}; }
  static BallDomain unit_centered(int n) { return {n, Point(n), 1.0}; }

  void validate() const {
    if (dim < 2 || dim > kMaxDim) throw DomainError("BallDomain: dimension must be 2 or 3");
    if (center.dim != dim) throw DomainError("BallDomain: center dimension mismatch");
    if (!(radius > 0.0)) throw DomainError("BallDomain: radius must be positive");
  }
  bool contains(const Point& x) const { return (x - center).norm2() < radius * radius; }
  /// Boundary point opposite the top of the ball; graded meshes cluster here.
  Point south_pole() const { return center - Point::axis(dim, radius); }
};

/// Signed distance to the sphere, positive inside.
inline double boundary_distance(const BallDomain& d, const Point& x) { return d.radius - (x - d.center).norm(); }

/// (|x'|, x_N) for x = (x', x_N).
inline std::pair<double, double> axial_coordinates(const Point& x) {
  double r2 = 0.0;
  for (int i = 0; i + 1 < x.dim; ++i) r2 += x[i] * x[i];
  return {std::sqrt(r2), x.last()};
}

/// Membership in the cone { x : exists t in (0,1), |x - t e_N| < t/8 }.
/// |x - t e_N|^2 / t^2 is a quadratic in 1/t, minimised at t* = |x|^2 / x_N.
inline bool in_cone(const Point& x) {
  const auto [rho, xn] = axial_coordinates(x);
  if (!(xn > 0.0)) return false;
  const double r2 = rho * rho + xn * xn;
  const double t_star = r2 / xn;
  constexpr double lim = 1.0 / 64.0;
  if (t_star < 1.0) return rho * rho / r2 < lim;
  return rho * rho + (xn - 1.0) * (xn - 1.0) < lim;
}

struct ProblemParams {
  int dim = 2;
  double alpha = 0.5;
  double p = 3.0;
  double s = 0.0;
  int resolution = 32;

  void validate() const {
    if (dim < 2 || dim > kMaxDim) throw DomainError("ProblemParams: dim must be 2 or 3");
    detail::check_alpha(alpha);
    if (!std::isfinite(p) || p < 0.0) throw DomainError("ProblemParams: p must be finite and >= 0");
    if (!std::isfinite(s) || s < 0.0) throw DomainError("ProblemParams: s must be finite and >= 0");
    if (resolution < 4) throw DomainError("ProblemParams: resolution must be >= 4");
  }
  /// Absorption threshold 1 + 2 alpha / N.
  double critical_p() const { return 1.0 + 2.0 * alpha / dim; }
  bool operator==(const ProblemParams&) const = default;
};

namespace detail {

// Orthonormal frame (e, e_perp[, e_perp2]) with e along v (any frame if v = 0).
inline std::array<Point, 3> frame_along(const Point& v) {
  const int N = v.dim;
  std::array<Point, 3> out{Point(N), Point(N), Point(N)};
  const double n = v.norm();
  Point e = n > 0.0 ? v * (1.0 / n) : Point::axis(N, 1.0);
  out[0] = e;
  // Gram-Schmidt against the coordinate axis least aligned with e.
  int k = 0;
  for (int i = 1; i < N; ++i)
    if (std::abs(e[i]) < std::abs(e[k])) k = i;
  Point a(N);
  a[k] = 1.0;
  Point p = a - e * a.dot(e);
  p = p * (1.0 / p.norm());
  out[1] = p;
  if (N == 3) {
    Point c(3);
    c[0] = e[1] * p[2] - e[2] * p[1];
    c[1] = e[2] * p[0] - e[0] * p[2];
    c[2] = e[0] * p[1] - e[1] * p[0];
    out[2] = c;
  }
  return out;
}

}  // namespace detail

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}
inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Polar product mesh of a ball, graded toward its south pole g.
///
/// Points are x = g + r (sin phi, [0,] cos phi) with r = 2R xi^gamma and
/// phi = eta * acos(r / 2R), so each circle about g is cut into equal angular
/// fractions of its arc inside the ball and eta = +-1 is the sphere. Cells near
/// g are graded annular sectors. Cells are uniform in (xi, eta); each node sits
/// at its cell centre and carries the exact N-volume of the cell as weight.
/// For N = 2, eta spans (-1, 1) with resolution+1 cells (an odd count, so one
/// node column lies on the axis). For N = 3 the mesh is axisymmetric: eta
/// spans (0, 1) with resolution/2 cells, each node stands for a ring in the
/// x_1 x_N meridian plane, and weights are ring volumes.
class Mesh {
 public:
  BallDomain domain;
  int resolution = 0;
  double grading_exponent = 1.0;
  int n_radial = 0;
  int n_angular = 0;
  std::vector<Point> nodes;
  std::vector<double> weights;
  std::uint64_t mesh_hash = 0;

  int dim() const { return domain.dim; }
  int size() const { return static_cast<int>(nodes.size()); }
  bool axisymmetric() const { return domain.dim == 3; }
  Point grading_point() const { return domain.south_pole(); }

  int index(int i_radial, int j_angular) const { return j_angular * n_radial + i_radial; }
  int radial_index(int k) const { return k % n_radial; }
  int angular_index(int k) const { return k / n_radial; }

  double eta_min() const { return axisymmetric() ? 0.0 : -1.0; }
  double eta_max() const { return 1.0; }
  double deta() const { return (eta_max() - eta_min()) / n_angular; }
  double dxi() const { return 1.0 / n_radial; }
  double xi_node(int i) const { return (i + 0.5) * dxi(); }
  double eta_node(int j) const { return eta_min() + (j + 0.5) * deta(); }

  /// Distance from g at radial parameter xi.
  double radius_at(double xi) const { return 2.0 * domain.radius * std::pow(xi, grading_exponent); }
  /// Half-opening angle of the arc of radius r about g inside the ball.
  double aperture(double r) const { return std::acos(std::min(1.0, r / (2.0 * domain.radius))); }

  /// Position for mesh parameters (xi, eta); N = 3 returns the meridian point.
  Point map(double xi, double eta) const {
    const double r = radius_at(xi);
    const double phi = eta * aperture(r);
    Point x = grading_point();
    x[0] += r * std::sin(phi);
    x[dim() - 1] += r * std::cos(phi);
    return x;
  }

  /// d(volume)/(dxi deta); for N = 3 per radian of azimuth (ring measure / 2pi).
  double jacobian(double xi, double eta) const {
    const double g = grading_exponent;
    const double r = radius_at(xi), a = aperture(r);
    const double dr = 2.0 * domain.radius * g * std::pow(xi, g - 1.0);
    const double area = r * dr * a;
    return dim() == 2 ? area : area * r * std::sin(eta * a);
  }

  /// Mesh parameters of a point inside the ball (meridian projection for N = 3).
  std::pair<double, double> parameters(const Point& x) const {
    const Point v = x - grading_point();
    const auto [rp, xn] = axial_coordinates(v);
    const double phi = dim() == 2 ? std::atan2(v[0], v[1]) : std::atan2(rp, xn);
    const double r = v.norm();
    const double xi = std::pow(std::min(r / (2.0 * domain.radius), 1.0), 1.0 / grading_exponent);
    const double a = aperture(r);
    const double eta = a > 0.0 ? std::clamp(phi / a, eta_min(), eta_max()) : 0.0;
    return {xi, eta};
  }

  /// Exact cell volume for the parameter box [xa,xb] x [ea,eb].
  double cell_volume(double xa, double xb, double ea, double eb) const {
    // With r = 2R cos(t) the aperture is t itself and the integrand is smooth.
    const double c = 2.0 * domain.radius;
    const double ta = aperture(radius_at(xb)), tb = aperture(radius_at(xa));
    const GaussRule& q = gauss_legendre(24);
    double s = 0.0;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * q.x[i];
      const double r = c * std::cos(t), dr = c * std::sin(t);
      const double f = dim() == 2 ? r * t * (eb - ea)
                                  : 2.0 * std::numbers::pi * r * r * (std::cos(ea * t) - std::cos(eb * t));
      s += q.w[i] * f * dr;
    }
    return 0.5 * (tb - ta) * s;
  }

  /// Largest meridian-plane distance between corners/edge midpoints of cell k.
  double cell_diameter(int k) const {
    const int i = radial_index(k), j = angular_index(k);
    const double xa = i * dxi(), xb = (i + 1) * dxi();
    const double ea = eta_min() + j * deta(), eb = ea + deta();
    std::vector<Point> pts;
    for (double x : {xa, 0.5 * (xa + xb), xb})
      for (double e : {ea, 0.5 * (ea + eb), eb}) pts.push_back(map(x, e));
    double d = 0.0;
    for (const Point& a : pts)
      for (const Point& b : pts) d = std::max(d, distance(a, b));
    return d;
  }

  std::string canonical_parameters() const {
    std::string s = "dim=" + std::to_string(dim()) + ";center=";
    for (int i = 0; i < dim(); ++i) s += format_g17(domain.center[i]) + (i + 1 < dim() ? "," : "");
    s += ";radius=" + format_g17(domain.radius) + ";resolution=" + std::to_string(resolution) +
         ";grading=" + format_g17(grading_exponent) + ";layout=polar-fan-v2";
    return s;
  }

  double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  std::string to_csv() const {
    std::string out;
    for (int i = 0; i < dim(); ++i) out += "x" + std::to_string(i + 1) + ",";
    out += "weight\n";
    for (int k = 0; k < size(); ++k) {
      for (int i = 0; i < dim(); ++i) out += format_g17(nodes[k][i]) + ",";
      out += format_g17(weights[k]) + "\n";
    }
    return out;
  }
};

/// Number of nodes produced by build_graded_mesh.
inline int graded_mesh_size(int dim, int resolution) {
  return dim == 2 ? resolution * (resolution + 1) : resolution * (resolution / 2);
}

inline Mesh build_graded_mesh(const BallDomain& domain, int resolution, double grading_exponent = 2.0) {
  domain.validate();
  if (resolution < 4) throw DomainError("build_graded_mesh: resolution must be >= 4");
  if (!(grading_exponent >= 1.0)) throw DomainError("build_graded_mesh: grading_exponent must be >= 1");
  Mesh m;
  m.domain = domain;
  m.resolution = resolution;
  m.grading_exponent = grading_exponent;
  m.n_radial = resolution;
  m.n_angular = domain.dim == 2 ? resolution + 1 : resolution / 2;
  const int n = m.n_radial * m.n_angular;
  m.nodes.reserve(n);
  m.weights.reserve(n);
  for (int j = 0; j < m.n_angular; ++j) {
    const double pa = m.eta_min() + j * m.deta(), pb = pa + m.deta();
    for (int i = 0; i < m.n_radial; ++i) {
      const double xa = i * m.dxi(), xb = (i + 1) * m.dxi();
      m.nodes.push_back(m.map(m.xi_node(i), m.eta_node(j)));
      m.weights.push_back(m.cell_volume(xa, xb, pa, pb));
    }
  }
  m.mesh_hash = fnv1a64(m.canonical_parameters());
  return m;
}

}  // namespace fracball
