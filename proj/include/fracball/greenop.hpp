#pragma once

// Dense discretization of the Green operator G_a[f](x) = int_B G(x,y) f(y) dy
// on a graded polar mesh, plus torsion, linear solutions and a binary cache.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "fracball/constants.hpp"
#include "fracball/errors.hpp"
#include "fracball/field.hpp"
#include "fracball/geometry.hpp"
#include "fracball/kernels.hpp"
#include "fracball/quadrature.hpp"

namespace fracball {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Integral of G(x, .) over the circle swept by y around the x_N axis,
/// int_0^{2pi} G dpsi, for meridian points x, y (second coordinate zero).
/// With a = |x'|, b = |y'| and d the meridian distance,
/// |x - R_psi y|^2 = d^2 + 4ab sin^2(psi/2). Near d = 0 the substitution
/// sin(psi/2) = (d/q) sinh(tau), q = 2 sqrt(ab), gives |x - R_psi y| = d cosh(tau)
/// and a smooth integrand.
class RingGreenKernel {
 public:
  RingGreenKernel(const BallGreenKernel& g) : g_(g) {}

  double operator()(const Point& x, const Point& y) const {
    const int N = x.dim;
    const double a = std::abs(x[0]), b = std::abs(y[0]);
    const double dz = x[N - 1] - y[N - 1];
    const double d2 = (a - b) * (a - b) + dz * dz;
    const double P = g_.boundary_product(x, y);
    const double ab = a * b;
    if (ab == 0.0) return 2.0 * std::numbers::pi * g_.from_invariants(d2, P);
    const double d = std::sqrt(d2);
    const double q = 2.0 * std::sqrt(ab);
    auto at = [&](double psi) {
      const double s = std::sin(0.5 * psi);
      return g_.from_invariants(d2 + q * q * s * s, P);
    };
    if (d >= 0.5 * q) return 2.0 * gauss_integrate(at, 0.0, std::numbers::pi, 24);
    double total = gauss_integrate(at, 0.5 * std::numbers::pi, std::numbers::pi, 12);
    const double s1 = std::sin(0.25 * std::numbers::pi);
    const double tau1 = std::asinh(q * s1 / d);
    auto in_tau = [&](double tau) {
      const double sh = d / q * std::sinh(tau);
      const double ch = std::cosh(tau);
      return g_.from_invariants(d2 * ch * ch, P) * 2.0 * d * ch / (q * std::sqrt(1.0 - sh * sh));
    };
    const double t0 = std::min(tau1, 2.0);
    total += gauss_integrate(in_tau, 0.0, t0, 16);
    for (double lo = t0; lo < tau1; lo += 3.0) total += gauss_integrate(in_tau, lo, std::min(lo + 3.0, tau1), 12);
    return 2.0 * total;
  }

 private:
  const BallGreenKernel& g_;
};

struct AssemblyOptions {
  /// Pairs closer than near_factor * (larger cell diameter) get subdivided cell quadrature.
  double near_factor = 1.0;
  int near_gauss = 4;
  /// Subcells per side for a near cell: ceil(near_subdivision * diameter / distance), clamped to [1, near_max_subdivision].
  double near_subdivision = 1.5;
  int near_max_subdivision = 4;
  /// Self-cell rule disagreement, relative to the row sum, that aborts assembly.
  double self_consistency_limit = 1e-2;
  /// Highest rung of the self-cell ladder (Gauss order, triangles per half side):
  /// (6,1) (8,2) (8,4) (12,4) (12,8).
  int self_max_level = 4;
};

struct AssemblyMeta {
  std::string scheme;
  long near_pairs = 0;
  double max_self_discrepancy = 0.0;
  long self_refinements = 0;
  double near_factor = 0.0;
};

struct KernelMatrix {
  std::uint64_t mesh_hash = 0;
  int dim = 0;
  double alpha = 0.0;
  DenseMatrix entries;
  AssemblyMeta meta;

  int size() const { return static_cast<int>(entries.rows()); }
};

namespace detail {

// Kernel in mesh parameter space: G(x, y(xi,eta)) times the volume density.
class ParamKernel {
 public:
  ParamKernel(const Mesh& m, const BallGreenKernel& g) : m_(m), g_(g), ring_(g) {}
  double operator()(const Point& x, double xi, double eta) const {
    const Point y = m_.map(xi, eta);
    const double k = m_.axisymmetric() ? ring_(x, y) : g_(x, y);
    return k * m_.jacobian(xi, eta);
  }

 private:
  const Mesh& m_;
  const BallGreenKernel& g_;
  RingGreenKernel ring_;
};

// Integral over cell j of the kernel at x, by s x s subcells of n x n Gauss points.
inline double cell_integral(const Mesh& m, const ParamKernel& K, const Point& x, int j, int s, int n) {
  const int ii = m.radial_index(j), jj = m.angular_index(j);
  const double xa = ii * m.dxi(), pa = m.eta_min() + jj * m.deta();
  const double hx = m.dxi() / s, hp = m.deta() / s;
  const GaussRule& g = gauss_legendre(n);
  double total = 0.0;
  for (int a = 0; a < s; ++a)
    for (int b = 0; b < s; ++b) {
      const double cx = xa + (a + 0.5) * hx, cp = pa + (b + 0.5) * hp;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
          total += g.w[u] * g.w[v] * K(x, cx + 0.5 * hx * g.x[u], cp + 0.5 * hp * g.x[v]);
    }
  return total * 0.25 * hx * hp;
}

// Quadtree refinement of an n x n Gauss rule on the parameter box, splitting
// until children and parent agree to rel_tol (relative to the whole-cell
// value) or max_depth is reached.
inline double adaptive_box(const ParamKernel& K, const Point& x, double xa, double xb, double pa, double pb,
                           const GaussRule& g, double parent, double abs_tol, int depth) {
  auto box = [&](double a0, double a1, double b0, double b1) {
    double t = 0.0;
    const double hx = a1 - a0, hp = b1 - b0;
    for (std::size_t u = 0; u < g.x.size(); ++u)
      for (std::size_t v = 0; v < g.x.size(); ++v)
        t += g.w[u] * g.w[v] * K(x, a0 + 0.5 * hx * (1.0 + g.x[u]), b0 + 0.5 * hp * (1.0 + g.x[v]));
    return 0.25 * hx * hp * t;
  };
  const double xm = 0.5 * (xa + xb), pm = 0.5 * (pa + pb);
  const double c[4] = {box(xa, xm, pa, pm), box(xm, xb, pa, pm), box(xa, xm, pm, pb), box(xm, xb, pm, pb)};
  const double sum = c[0] + c[1] + c[2] + c[3];
  if (depth <= 0 || std::abs(sum - parent) <= abs_tol) return sum;
  const double t = 0.25 * abs_tol;
  return adaptive_box(K, x, xa, xm, pa, pm, g, c[0], t, depth - 1) +
         adaptive_box(K, x, xm, xb, pa, pm, g, c[1], t, depth - 1) +
         adaptive_box(K, x, xa, xm, pm, pb, g, c[2], t, depth - 1) +
         adaptive_box(K, x, xm, xb, pm, pb, g, c[3], t, depth - 1);
}

inline double cell_integral_adaptive(const Mesh& m, const ParamKernel& K, const Point& x, int j, int n,
                                     double rel_tol, int max_depth) {
  const int ii = m.radial_index(j), jj = m.angular_index(j);
  const double xa = ii * m.dxi(), pa = m.eta_min() + jj * m.deta();
  const GaussRule& g = gauss_legendre(n);
  const double whole = cell_integral(m, K, x, j, 1, n);
  return adaptive_box(K, x, xa, xa + m.dxi(), pa, pa + m.deta(), g, whole, rel_tol * std::abs(whole), max_depth);
}

// Self-cell integral: the cell is cut into 8 * split triangles with apex at the node;
// each is mapped by Duffy's transform with radial variable w. Near w = 0,
// w = w0 u^{1/(2a)} cancels the w^{2a-1} behaviour of kernel times Duffy
// Jacobian. When the node is closer to the sphere than the cell is wide the
// kernel changes character at w ~ rho(x) / cell size, so [w0, 1] is split
// geometrically from w0 = that ratio.
inline double self_integral(const Mesh& m, const ParamKernel& K, int k, double alpha, int n, int split) {
  const int ii = m.radial_index(k), jj = m.angular_index(k);
  const double xa = ii * m.dxi(), xb = xa + m.dxi();
  const double pa = m.eta_min() + jj * m.deta(), pb = pa + m.deta();
  const double xc = m.xi_node(ii), pc = m.eta_node(jj);
  const Point x = m.nodes[k];
  // Ring on the box boundary: the corners plus 8 * split points at equal
  // angles in the physical plane, so that slivers (where the map squeezes one
  // direction) still see the singularity as round.
  const double eps = 1e-12;
  const double h = 1e-6;
  const int last = m.dim() - 1;
  const Point ex = m.map(xc + h, pc) - m.map(xc - h, pc), ep = m.map(xc, pc + h) - m.map(xc, pc - h);
  const double a11 = ex[0], a21 = ex[last], a12 = ep[0], a22 = ep[last];
  const double det_a = a11 * a22 - a12 * a21;
  std::vector<double> angles;
  const double ca[4][2] = {{xa, pa}, {xb, pa}, {xb, pb}, {xa, pb}};
  for (const auto& c : ca) angles.push_back(std::atan2(c[1] - pc, c[0] - xc));
  const int na = 8 * split;
  for (int q = 0; q < na; ++q) {
    const double th = 2.0 * std::numbers::pi * (q + 0.5) / na;
    // parameter direction A^{-1} (cos th, sin th)
    const double dx = (a22 * std::cos(th) - a12 * std::sin(th)) / det_a;
    const double dp = (-a21 * std::cos(th) + a11 * std::sin(th)) / det_a;
    angles.push_back(std::atan2(dp, dx));
  }
  std::sort(angles.begin(), angles.end());
  std::vector<std::array<double, 2>> ring;
  for (double t : angles) {
    const double dx = std::cos(t), dp = std::sin(t);
    const double sx = dx > 0 ? (xb - xc) / dx : dx < 0 ? (xa - xc) / dx : 1e300;
    const double sp = dp > 0 ? (pb - pc) / dp : dp < 0 ? (pa - pc) / dp : 1e300;
    const double sm = std::min(sx, sp);
    ring.push_back({xc + sm * dx, pc + sm * dp});
  }
  // Sides lying on the sphere (the collapsed ends xi = 0 and xi = 1 and,
  // for N = 2, both eta ends) make the kernel vanish like a power there.
  auto on_sphere = [&](const std::array<double, 2>& p1, const std::array<double, 2>& p2) {
    const double mx = 0.5 * (p1[0] + p2[0]), mp = 0.5 * (p1[1] + p2[1]);
    const double tol = 1e-9 * (m.dxi() + m.deta());
    if (std::abs(mx - xb) < tol) return xb >= 1.0 - eps;
    if (std::abs(mx - xa) < tol) return xa <= eps;
    if (std::abs(mp - pb) < tol) return pb >= m.eta_max() - eps;
    if (std::abs(mp - pa) < tol) return m.dim() == 2 && pa <= m.eta_min() + eps;
    return false;
  };
  const GaussRule& g = gauss_legendre(n);
  const double e = 1.0 / (2.0 * alpha);
  const double w0 = std::clamp(2.0 * boundary_distance(m.domain, x) / m.cell_diameter(k), 1e-4, 1.0);

  // Radial rule on [0, 1]: (w, weight including dw).
  std::vector<std::pair<double, double>> radial;
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (1.0 + g.x[i]);
    radial.emplace_back(w0 * std::pow(u, e), 0.5 * g.w[i] * w0 * e * std::pow(u, e - 1.0));
  }
  std::vector<std::pair<double, double>> radial_end = radial;
  for (double lo = w0; lo < 1.0; lo *= 2.0) {
    const double hi = std::min(1.0, 2.0 * lo);
    for (int i = 0; i < n; ++i) {
      const double u = 0.5 * (1.0 + g.x[i]);
      radial.emplace_back(lo + (hi - lo) * u, 0.5 * (hi - lo) * g.w[i]);
      if (hi < 1.0) {
        radial_end.push_back(radial.back());
      } else {
        // w = 1 - (1 - lo) s^(1/alpha) absorbs the boundary power
        const double q = 1.0 / alpha;
        radial_end.emplace_back(1.0 - (1.0 - lo) * std::pow(u, q),
                                0.5 * g.w[i] * (1.0 - lo) * q * std::pow(u, q - 1.0));
      }
    }
  }

  double total = 0.0;
  const int nt = static_cast<int>(ring.size());
  for (int t = 0; t < nt; ++t) {
    const auto& p1 = ring[t];
    const auto& p2 = ring[(t + 1) % nt];
    const double ax = p1[0] - xc, ay = p1[1] - pc, bx = p2[0] - xc, by = p2[1] - pc;
    const double det = std::abs(ax * by - ay * bx);
    for (const auto& [w, ww] : on_sphere(p1, p2) ? radial_end : radial) {
      for (int j = 0; j < n; ++j) {
        const double v = 0.5 * (1.0 + g.x[j]);
        const double px = xc + w * ((1.0 - v) * ax + v * bx);
        const double py = pc + w * ((1.0 - v) * ay + v * by);
        total += 0.5 * g.w[j] * ww * K(x, px, py) * w * det;
      }
    }
  }
  return total;
}

}  // namespace detail

/// M[i][j] ~ int_{cell j} G(x_i, y) dy. Far pairs use the one-point rule
/// w_j G(x_i, y_j); near pairs a subdivided Gauss rule, averaged between the
/// two directions so that M[i][j] / w_j = M[j][i] / w_i exactly; the diagonal
/// a Duffy rule on the cell. For N = 3 each node stands for a ring and the
/// kernel is integrated over the azimuth.
inline KernelMatrix assemble(const Mesh& mesh, double alpha, const AssemblyOptions& opt = {}) {
  detail::check_alpha(alpha);
  const int n = mesh.size();
  if (n < 1) throw DomainError("assemble: empty mesh");
  const BallGreenKernel G(mesh.domain, alpha);
  const RingGreenKernel ring(G);
  const detail::ParamKernel PK(mesh, G);
  const bool axi = mesh.axisymmetric();
  const double two_pi = 2.0 * std::numbers::pi;

  KernelMatrix K;
  K.mesh_hash = mesh.mesh_hash;
  K.dim = mesh.dim();
  K.alpha = alpha;
  K.entries.resize(n, n);
  K.meta.near_factor = opt.near_factor;
  K.meta.scheme = std::string(axi ? "ring-" : "") + "one-point far field; near " + std::to_string(opt.near_gauss) +
                  "x" + std::to_string(opt.near_gauss) + " Gauss on subcells, symmetrized; self Duffy ladder to level " +
                  std::to_string(opt.self_max_level);

  std::vector<double> diam(n);
  for (int k = 0; k < n; ++k) diam[k] = mesh.cell_diameter(k);
  const std::vector<double>& w = mesh.weights;

  for (int i = 0; i < n; ++i) {
    const Point& xi = mesh.nodes[i];
    for (int j = i + 1; j < n; ++j) {
      const Point& yj = mesh.nodes[j];
      const double dist = distance(xi, yj);
      const double dmax = std::max(diam[i], diam[j]);
      double g;
      if (dist < opt.near_factor * dmax) {
        auto subdiv = [&](int target) {
          return std::clamp(static_cast<int>(std::ceil(opt.near_subdivision * diam[target] / dist)), 1,
                            opt.near_max_subdivision);
        };
        const double aij = detail::cell_integral(mesh, PK, xi, j, subdiv(j), opt.near_gauss);
        const double aji = detail::cell_integral(mesh, PK, yj, i, subdiv(i), opt.near_gauss);
        g = 0.5 * (aij / w[j] + aji / w[i]);
        ++K.meta.near_pairs;
      } else {
        g = axi ? ring(xi, yj) / two_pi : G(xi, yj);
      }
      K.entries(i, j) = w[j] * g;
      K.entries(j, i) = w[i] * g;
    }
  }
  // Self cells: climb a ladder of Duffy rules until two successive levels
  // agree, then require the remaining gap to be small against the row sum.
  static constexpr std::array<std::array<int, 2>, 5> ladder = {{{6, 1}, {8, 2}, {8, 4}, {12, 4}, {12, 8}}};
  const int top = std::clamp(opt.self_max_level, 1, static_cast<int>(ladder.size()) - 1);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += K.entries(i, j);
    double prev = detail::self_integral(mesh, PK, i, alpha, ladder[0][0], ladder[0][1]);
    double fine = prev, gap = 0.0;
    for (int level = 1; level <= top; ++level) {
      fine = detail::self_integral(mesh, PK, i, alpha, ladder[level][0], ladder[level][1]);
      gap = std::abs(fine - prev);
      if (gap <= std::max(1e-4 * std::abs(fine), 1e-3 * (off + fine))) break;
      prev = fine;
      ++K.meta.self_refinements;
    }
    const double disc = gap / (off + fine);
    K.meta.max_self_discrepancy = std::max(K.meta.max_self_discrepancy, disc);
    if (!(disc <= opt.self_consistency_limit))
      throw DomainError("assemble: self-cell quadrature inconsistent at node " + std::to_string(i) +
                        " (gap " + std::to_string(disc) + " of the row sum); mesh too coarse");
    K.entries(i, i) = fine;
  }
  return K;
}

inline void check_matrix_mesh(const KernelMatrix& K, const Mesh& mesh) {
  if (K.mesh_hash != mesh.mesh_hash || K.size() != mesh.size())
    throw MeshMismatchError("kernel matrix belongs to mesh " + hash_hex(K.mesh_hash) + ", not " +
                            hash_hex(mesh.mesh_hash));
}

inline Field apply(const KernelMatrix& K, const Field& f) {
  if (f.mesh_hash != K.mesh_hash || f.size() != K.size())
    throw MeshMismatchError("apply: field and matrix live on different meshes");
  Field out{K.mesh_hash, std::vector<double>(f.size())};
  Eigen::Map<const Eigen::VectorXd> v(f.values.data(), f.size());
  Eigen::Map<Eigen::VectorXd> r(out.values.data(), f.size());
  r.noalias() = K.entries * v;
  return out;
}

/// max |M[i][j]/w_j - M[j][i]/w_i| / max(|M[i][j]/w_j|, tiny).
inline double weighted_symmetry_defect(const KernelMatrix& K, const Mesh& mesh) {
  check_matrix_mesh(K, mesh);
  double worst = 0.0;
  for (int i = 0; i < K.size(); ++i)
    for (int j = i + 1; j < K.size(); ++j) {
      const double a = K.entries(i, j) / mesh.weights[j], b = K.entries(j, i) / mesh.weights[i];
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
    }
  return worst;
}

/// G_a[1] on the mesh; V_B for a centered ball, xi_0 for B_1(e_N).
inline Field torsion(const Mesh& mesh, const KernelMatrix& K) {
  check_matrix_mesh(K, mesh);
  return apply(K, Field::constant(mesh, 1.0));
}

inline double torsion_center_value(int N, double alpha) {
  return std::tgamma(0.5 * N) /
         (std::pow(2.0, 2.0 * alpha) * std::tgamma(0.5 * N + alpha) * std::tgamma(1.0 + alpha));
}

/// Closed-form torsion of the mesh's ball sampled at the nodes.
inline Field torsion_exact(const Mesh& mesh, double alpha) {
  const double gam = torsion_center_value(mesh.dim(), alpha);
  const double R2 = mesh.domain.radius * mesh.domain.radius;
  return Field::sample(mesh, [&](const Point& x) {
    return gam * std::pow(std::max(R2 - (x - mesh.domain.center).norm2(), 0.0), alpha);
  });
}

struct LinearSolution {
  Field field;
  Field source;
  bool mesh_dependent = false;  // s = 0: G_a[Gamma_0] has no continuum limit
};

/// G_a[Gamma_s] with Gamma_s sampled at the nodes.
inline LinearSolution linear_solution(const Mesh& mesh, const KernelMatrix& K, const ProblemParams& params, double s,
                                      double cN) {
  check_matrix_mesh(K, mesh);
  if (!(s >= 0.0)) throw DomainError("linear_solution: s must be >= 0");
  LinearSolution out;
  out.source = Field::sample(mesh, [&](const Point& x) { return gamma_source(x, s, params, cN); });
  out.field = apply(K, out.source);
  out.mesh_dependent = s == 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Matrix cache

inline constexpr char kMatrixMagic[12] = {'F', 'R', 'A', 'C', 'B', 'A', 'L', 'L', '-', 'G', 'K', '1'};
inline constexpr std::size_t kMatrixHeaderBytes = sizeof(kMatrixMagic) + 4 * 8;

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(sizeof(T) == 8);
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  os.write(reinterpret_cast<const char*>(&u), 8);
}

template <class T>
T get_le(const char* p) {
  std::uint64_t u;
  std::memcpy(&u, p, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  T v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

inline void save_matrix(const KernelMatrix& K, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_matrix: cannot open " + path.string());
  os.write(kMatrixMagic, sizeof(kMatrixMagic));
  detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(K.dim));
  detail::put_le<double>(os, K.alpha);
  detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(K.size()));
  detail::put_le<std::uint64_t>(os, K.mesh_hash);
  const Eigen::Index n = K.entries.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) detail::put_le<double>(os, K.entries(i, j));
  if (!os) throw std::runtime_error("save_matrix: write failed for " + path.string());
}

/// Reads a cache file; CorruptFileError when it is not a well-formed cache.
inline KernelMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_matrix: cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMatrixHeaderBytes || std::memcmp(bytes.data(), kMatrixMagic, sizeof(kMatrixMagic)) != 0)
    throw CorruptFileError("load_matrix: " + path.string() + " has no FRACBALL-GK1 header");
  const char* p = bytes.data() + sizeof(kMatrixMagic);
  KernelMatrix K;
  K.dim = static_cast<int>(detail::get_le<std::uint64_t>(p));
  K.alpha = detail::get_le<double>(p + 8);
  const auto n = detail::get_le<std::uint64_t>(p + 16);
  K.mesh_hash = detail::get_le<std::uint64_t>(p + 24);
  if (n > (1ULL << 20) || bytes.size() != kMatrixHeaderBytes + n * n * 8)
    throw CorruptFileError("load_matrix: " + path.string() + " has the wrong length for " + std::to_string(n) +
                           " nodes");
  K.entries.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const char* d = bytes.data() + kMatrixHeaderBytes;
  for (std::uint64_t i = 0; i < n * n; ++i) K.entries.data()[i] = detail::get_le<double>(d + 8 * i);
  K.meta.scheme = "loaded from " + path.string();
  return K;
}

/// Reads a cache file and checks it was built for this mesh and alpha.
inline KernelMatrix load_matrix(const std::filesystem::path& path, const Mesh& mesh, double alpha) {
  KernelMatrix K = load_matrix(path);
  if (K.mesh_hash != mesh.mesh_hash || K.size() != mesh.size() || K.dim != mesh.dim() || K.alpha != alpha)
    throw MeshMismatchError("load_matrix: cache " + path.string() + " was built for mesh " + hash_hex(K.mesh_hash) +
                            " (alpha " + format_g17(K.alpha) + "), requested mesh " + hash_hex(mesh.mesh_hash) +
                            " (alpha " + format_g17(alpha) + ")");
  return K;
}

/// Loads from `path` when a matching cache exists, otherwise assembles and stores it.
inline KernelMatrix cached_assemble(const Mesh& mesh, double alpha, const std::filesystem::path& path,
                                    const AssemblyOptions& opt = {}) {
  if (!path.empty() && std::filesystem::exists(path)) {
    try {
      return load_matrix(path, mesh, alpha);
    } catch (const MeshMismatchError&) {
    } catch (const CorruptFileError&) {
    }
  }
  KernelMatrix K = assemble(mesh, alpha, opt);
  if (!path.empty()) save_matrix(K, path);
  return K;
}

}  // namespace fracball
