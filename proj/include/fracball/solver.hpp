#pragma once

// Discrete semilinear problem u + G[u^p] = G[f] on a mesh, and the
// diagnostics run on its solutions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracball/constants.hpp"
#include "fracball/errors.hpp"
#include "fracball/field.hpp"
#include "fracball/fracop.hpp"
#include "fracball/geometry.hpp"
#include "fracball/greenop.hpp"
#include "fracball/kernels.hpp"

namespace fracball {

enum class Scheme { damped_picard, newton };

inline const char* to_string(Scheme s) { return s == Scheme::newton ? "newton" : "damped_picard"; }

struct SolveOptions {
  Scheme scheme = Scheme::newton;
  double damping = 0.5;
  double tol_residual = 1e-9;
  double tol_sandwich = 1e-7;
  int max_iters = 400;
  /// Damped Picard steps taken before Newton.
  int warmup = 3;

  void validate() const {
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("SolveOptions: damping must lie in (0,1]");
    if (!(tol_residual > 0.0) || !(tol_sandwich > 0.0)) throw DomainError("SolveOptions: tolerances must be positive");
    if (max_iters < 1) throw DomainError("SolveOptions: max_iters must be >= 1");
    if (warmup < 0) throw DomainError("SolveOptions: warmup must be >= 0");
  }
};

// Residuals are sup|u - clip(G[f] - G[u^p], 0, G[f])| divided by
// max(1, |G[f]|_inf), so one tolerance serves sources whose potentials range
// over many decades. Off the clipped nodes this is u + G[u^p] - G[f].
struct SolveReport {
  int iterations = 0;
  double final_residual = 0.0;
  double sandwich_gap = 0.0;
  bool converged = false;
  double scale = 1.0;
  /// Nodes held at u = 0 because g - G[u^p] is negative there.
  int clipped_nodes = 0;
  std::string scheme;
  std::string note;
};

struct SolveResult {
  Field field;
  SolveReport report;
};

namespace detail {

using Vec = Eigen::VectorXd;

inline Eigen::Map<const Vec> view(const Field& f) { return {f.values.data(), static_cast<Eigen::Index>(f.values.size())}; }

inline Field to_field(const Mesh& m, const Vec& v) { return {m.mesh_hash, std::vector<double>(v.data(), v.data() + v.size())}; }

// The iteration targets the clipped fixed point u = clip(g - K u^p, 0, g).
// Where the clip is inactive this is u + K u^p = g; near the singular point
// the one-point rule for u^p can push the unclipped discrete solution below
// zero, and there u = 0 is kept.
//
// With node weights w and K = A diag(w), A symmetric positive definite, the
// unclipped system is the gradient of the convex energy
//   E(u) = 1/2 (u - g)' A^{-1} (u - g) + sum_j w_j u_j^{p+1} / (p + 1)
// and the Newton direction is a descent direction for it. A sup-norm merit
// stalls for large p, so Newton line searches on E when it is available.
class SemilinearSystem {
 public:
  SemilinearSystem(const KernelMatrix& K, Vec g, double p, std::span<const double> weights = {})
      : K_(K), g_(std::move(g)), p_(p) {
    scale_ = std::max(1.0, g_.cwiseAbs().maxCoeff());
    if (weights.empty()) return;
    const Eigen::Index n = g_.size();
    sw_ = Eigen::Map<const Vec>(weights.data(), n).cwiseSqrt();
    // S = W^{1/2} A W^{1/2}, entrywise K_ij sqrt(w_i / w_j)
    DenseMatrix S = sw_.asDiagonal() * K_.entries * sw_.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose()).eval();
    llt_.compute(S);
    energy_ = llt_.info() == Eigen::Success;
  }

  bool has_energy() const { return energy_; }
  // Energy and its gradient; u >= 0 is assumed.
  double energy(const Vec& u) const {
    const Vec z = sw_.cwiseProduct(u - g_);
    return 0.5 * z.dot(llt_.solve(z)) + sw_.cwiseAbs2().dot(u.array().pow(p_ + 1.0).matrix()) / (p_ + 1.0);
  }
  Vec energy_gradient(const Vec& u) const {
    const Vec z = sw_.cwiseProduct(u - g_);
    return sw_.cwiseProduct(llt_.solve(z)) + sw_.cwiseAbs2().cwiseProduct(power(u));
  }

  const Vec& upper() const { return g_; }
  double scale() const { return scale_; }

  Vec power(const Vec& u) const { return u.array().pow(p_).matrix(); }
  Vec unclipped(const Vec& u) const { return g_ - K_.entries * power(u); }
  Vec clip(const Vec& u) const { return u.cwiseMax(0.0).cwiseMin(g_); }
  Vec picard_map(const Vec& u) const { return clip(unclipped(u)); }
  Vec residual(const Vec& u) const { return u - picard_map(u); }
  double norm(const Vec& r) const { return r.cwiseAbs().maxCoeff() / scale_; }
  int clipped(const Vec& u) const { return static_cast<int>((unclipped(u).array() < 0.0).count()); }

  // Semismooth Newton: rows where the clip is active reduce to u_i = 0.
  Vec newton_step(const Vec& u, const Vec& r) const {
    const Vec d = (p_ * u.array().pow(p_ - 1.0)).matrix();
    const Vec t = unclipped(u);
    DenseMatrix J = K_.entries * d.asDiagonal();
    for (Eigen::Index i = 0; i < J.rows(); ++i)
      if (t[i] < 0.0) J.row(i).setZero();
    J.diagonal().array() += 1.0;
    return J.partialPivLu().solve(-r);
  }

 private:
  const KernelMatrix& K_;
  Vec g_;
  double p_;
  double scale_;
  Vec sw_;
  Eigen::LLT<DenseMatrix> llt_;
  bool energy_ = false;
};

struct RunOutcome {
  Vec u;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

inline RunOutcome run_from(const SemilinearSystem& sys, Vec u, double p, const SolveOptions& opt) {
  RunOutcome out;
  u = sys.clip(u);
  Vec r = sys.residual(u);
  double res = sys.norm(r);
  double theta = opt.damping;
  // Newton needs p u^{p-1} finite at u = 0.
  const bool newton = opt.scheme == Scheme::newton && p >= 1.0;
  int it = 0;
  auto picard = [&]() {
    for (int tries = 0; tries < 30; ++tries) {
      Vec trial = (1.0 - theta) * u + theta * sys.picard_map(u);
      Vec rt = sys.residual(trial);
      const double nt = sys.norm(rt);
      if (nt < res || tries == 29) {
        u = std::move(trial);
        r = std::move(rt);
        res = nt;
        theta = std::min(opt.damping, 2.0 * theta);
        return;
      }
      theta = std::max(0.5 * theta, 1e-8);
    }
  };
  while (res > opt.tol_residual && it < opt.max_iters) {
    ++it;
    if (!newton || it <= opt.warmup) {
      picard();
      continue;
    }
    const Vec du = sys.newton_step(u, r);
    bool taken = false;
    double e0 = 0.0, slope = 0.0;
    const bool descent = sys.has_energy() && (slope = sys.energy_gradient(u).dot(du)) < 0.0;
    if (descent) e0 = sys.energy(u);
    for (double t = 1.0; t > 1e-10; t *= 0.5) {
      Vec trial = sys.clip(u + t * du);
      Vec rt = sys.residual(trial);
      const double nt = sys.norm(rt);
      // Near convergence E is flat to rounding, hence the slack.
      const bool ok = descent ? sys.energy(trial) <= e0 + 1e-4 * t * slope + 1e-13 * std::abs(e0)
                              : nt < (1.0 - 1e-4 * t) * res;
      if (ok) {
        u = std::move(trial);
        r = std::move(rt);
        res = nt;
        taken = true;
        break;
      }
    }
    if (!taken) picard();
  }
  out.u = std::move(u);
  out.iterations = it;
  out.residual = res;
  out.converged = res <= opt.tol_residual;
  return out;
}

}  // namespace detail

/// Fixed point of u = G[f] - G[u^p] with 0 <= u <= G[f], from u = 0 and from
/// u = G[f] (or from `start` instead of 0 when given). The reported sandwich
/// gap is the scaled sup distance between the two limits.
inline SolveResult solve_semilinear(const Mesh& mesh, const KernelMatrix& K, const Field& source, double p,
                                    const SolveOptions& opt = {}, const std::optional<Field>& start = std::nullopt) {
  opt.validate();
  check_matrix_mesh(K, mesh);
  source.check_against(mesh);
  if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("solve_semilinear: p must be finite and >= 0");
  for (double v : source.values)
    if (v < 0.0) throw DomainError("solve_semilinear: source must be nonnegative");
  if (start) start->check_against(mesh);

  const detail::Vec g = K.entries * detail::view(source);
  SolveResult out;
  out.report.scheme = to_string(opt.scheme);

  if (p == 0.0) {
    // u^0 = 1: the linear identity u = G[f] - G[1], which may go negative.
    const detail::Vec one = detail::Vec::Ones(g.size());
    const detail::Vec u = g - K.entries * one;
    out.field = detail::to_field(mesh, u);
    out.report.scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    out.report.final_residual = (u + K.entries * one - g).cwiseAbs().maxCoeff() / out.report.scale;
    out.report.converged = out.report.final_residual <= opt.tol_residual;
    out.report.note = "linear case p = 0, no clipping";
    return out;
  }

  const detail::SemilinearSystem sys(K, g, p, mesh.weights);
  out.report.scale = sys.scale();
  const detail::Vec lower0 = start ? detail::Vec(detail::view(*start)) : detail::Vec::Zero(g.size());
  const detail::RunOutcome a = detail::run_from(sys, lower0, p, opt);
  const detail::RunOutcome b = detail::run_from(sys, g, p, opt);
  out.field = detail::to_field(mesh, a.u);
  out.report.iterations = a.iterations + b.iterations;
  out.report.final_residual = std::max(a.residual, b.residual);
  out.report.sandwich_gap = (a.u - b.u).cwiseAbs().maxCoeff() / sys.scale();
  out.report.clipped_nodes = sys.clipped(a.u);
  out.report.converged =
      a.converged && b.converged && out.report.sandwich_gap <= opt.tol_sandwich;
  return out;
}

inline Field gamma_field(const Mesh& mesh, const ProblemParams& params, double s, double cN) {
  return Field::sample(mesh, [&](const Point& x) { return gamma_source(x, s, params, cN); });
}

/// Interior restriction of the solution with the Dirac at -s e_N.
inline SolveResult solve_exterior_dirac(const Mesh& mesh, const KernelMatrix& K, const ProblemParams& params,
                                        double cN, const SolveOptions& opt = {},
                                        const std::optional<Field>& start = std::nullopt) {
  params.validate();
  if (!(params.s > 0.0)) throw DomainError("solve_exterior_dirac: s must be positive (use limit_solution for s = 0)");
  return solve_semilinear(mesh, K, gamma_field(mesh, params, params.s, cN), params.p, opt, start);
}

struct SweepEntry {
  double s = 0.0;
  Field field;
  SolveReport report;
  /// Nodes where this solution dropped below the previous one by more than eps.
  int monotonicity_violations = 0;
  double worst_drop = 0.0;
  double eps = 0.0;
};

/// Solves along a decreasing list of s, each warm-started from the previous.
inline std::vector<SweepEntry> sweep_s(const Mesh& mesh, const KernelMatrix& K, ProblemParams params,
                                       const std::vector<double>& s_list, double cN, const SolveOptions& opt = {}) {
  if (s_list.empty()) throw DomainError("sweep_s: empty s list");
  for (std::size_t i = 0; i < s_list.size(); ++i) {
    if (!(s_list[i] > 0.0)) throw DomainError("sweep_s: all s must be positive");
    if (i > 0 && !(s_list[i] < s_list[i - 1])) throw DomainError("sweep_s: s list must be strictly decreasing");
  }
  std::vector<SweepEntry> out;
  std::optional<Field> start;
  for (double s : s_list) {
    params.s = s;
    SweepEntry e;
    e.s = s;
    try {
      SolveResult r = solve_exterior_dirac(mesh, K, params, cN, opt, start);
      e.field = std::move(r.field);
      e.report = std::move(r.report);
    } catch (const std::exception& ex) {
      throw DomainError("sweep_s: solve failed at s = " + format_g17(s) + ": " + ex.what());
    }
    e.eps = 10.0 * opt.tol_residual * e.report.scale;
    if (!out.empty()) {
      const Field& prev = out.back().field;
      for (int k = 0; k < e.field.size(); ++k) {
        const double drop = prev[k] - e.field[k];
        e.worst_drop = std::max(e.worst_drop, drop);
        if (drop > e.eps) ++e.monotonicity_violations;
      }
    }
    start = e.field;
    out.push_back(std::move(e));
  }
  return out;
}

struct LimitResult {
  Field field;
  SolveReport report;
  /// Offsets visited by the continuation; the field belongs to the last.
  std::vector<double> s_path;
  double s_effective = 0.0;
  /// Scaled sup change between the last two continuation steps on |x| > 0.2.
  double last_change = 0.0;
  /// Certificate k Phi_{sigma_0}, sigma_0 = (N + 2a)/p, checked at the nodes.
  double sigma0 = 0.0;
  MultiplierSearch certificate;
  double max_barrier_ratio = 0.0;  // max_k u / (k Phi)
  bool below_barrier = false;
};

inline std::string threshold_message(const ProblemParams& params) {
  std::ostringstream os;
  os << "p = " << params.p << " is at or below the existence threshold 1 + 2*alpha/N = " << params.critical_p()
     << "; no weak solution exists for a boundary Dirac source";
  return os.str();
}

/// Smallest offset the mesh resolves: half the distance from the pole to the
/// second node of the axis column.
inline double resolved_offset(const Mesh& mesh) {
  const double r1 = 2.0 * mesh.domain.radius * std::pow(mesh.xi_node(1), mesh.grading_exponent);
  return 0.5 * r1;
}

/// The boundary-Dirac solution u_0 as the limit of u_s. Gamma_0 sampled at the
/// nodes gives a discrete problem without a nonnegative solution (G[Gamma_0]
/// diverges through the boundary layer at 0), so s is halved from s_start with
/// warm starts down to resolved_offset(mesh), and the last converged u_s with
/// no clipped node is returned.
inline LimitResult limit_solution(const Mesh& mesh, const KernelMatrix& K, const ProblemParams& params, double cN,
                                  const SolveOptions& opt = {}, const QuadratureSpec& q = {},
                                  double s_start = 0.05) {
  params.validate();
  if (params.p <= params.critical_p()) throw InfeasibleError("limit_solution: " + threshold_message(params));
  if (!(s_start > 0.0)) throw DomainError("limit_solution: s_start must be positive");
  LimitResult out;
  const double floor = resolved_offset(mesh);
  std::vector<double> path;
  for (double s = s_start; s > floor; s *= 0.5) path.push_back(s);
  if (path.empty() || path.back() > floor * (1.0 + 1e-12)) path.push_back(std::min(floor, s_start));

  ProblemParams ps = params;
  std::optional<Field> start;
  for (double s : path) {
    ps.s = s;
    SolveResult r = solve_exterior_dirac(mesh, K, ps, cN, opt, start);
    if (!r.report.converged || r.report.clipped_nodes > 0) {
      if (!start) {
        out.field = std::move(r.field);
        out.report = std::move(r.report);
        out.s_effective = s;
        out.s_path.push_back(s);
      }
      out.report.note = "continuation stopped before s = " + format_g17(s);
      break;
    }
    if (start) {
      double d = 0.0;
      for (int k = 0; k < mesh.size(); ++k)
        if (mesh.nodes[k].norm() > 0.2) d = std::max(d, std::abs(r.field[k] - (*start)[k]));
      out.last_change = d / std::max(1.0, r.field.sup_norm());
    }
    start = r.field;
    out.field = std::move(r.field);
    out.report = std::move(r.report);
    out.s_effective = s;
    out.s_path.push_back(s);
  }
  if (out.report.note.empty()) out.report.note = "continuation in s down to " + format_g17(out.s_effective);

  out.sigma0 = barrier_exponent(params.dim, params.alpha, params.p);
  if (out.sigma0 < params.dim) {
    BarrierSpec b;
    b.kind = BarrierKind::power;
    b.sigma = out.sigma0;
    out.certificate = find_supersolution_multiplier(b, params, mesh.nodes, cN, q);
  }
  if (out.certificate.found) {
    for (int k = 0; k < mesh.size(); ++k)
      out.max_barrier_ratio =
          std::max(out.max_barrier_ratio, out.field[k] / (out.certificate.k * phi_power(mesh.nodes[k], out.sigma0)));
    out.below_barrier = out.max_barrier_ratio <= 1.0 + opt.tol_residual;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct SymmetryReport {
  double defect = 0.0;           // max |u(x', x_N) - u(-x', x_N)| over mirrored node pairs
  double field_max = 0.0;
  int radial_violations = 0;     // increases in r' at fixed x_N
  int radial_pairs = 0;
  int axial_violations = 0;      // increases in x_N above the centre
  int axial_pairs = 0;
  double relative_defect() const { return field_max > 0.0 ? defect / field_max : defect; }
};

/// Mirror defect over node pairs (i, j) <-> (i, n_angular - 1 - j), then
/// monotonicity of the interpolant in r' and in x_N on a sampling grid.
/// For N = 3 the axisymmetric mesh has no pairs to compare and is rejected.
inline SymmetryReport symmetry_check(const Mesh& mesh, const Field& u, int grid = 24) {
  u.check_against(mesh);
  if (mesh.axisymmetric())
    throw DomainError("symmetry_check: axisymmetric mesh stores no rotation pairs (symmetry holds by construction)");
  SymmetryReport rep;
  rep.field_max = u.sup_norm();
  for (int j = 0; j < mesh.n_angular; ++j)
    for (int i = 0; i < mesh.n_radial; ++i)
      rep.defect = std::max(rep.defect, std::abs(u[mesh.index(i, j)] - u[mesh.index(i, mesh.n_angular - 1 - j)]));

  const FieldInterpolant I(mesh, u);
  const double R = mesh.domain.radius;
  const Point c = mesh.domain.center;
  const int N = mesh.dim();
  const double slack = 1e-12 * std::max(rep.field_max, 1.0);
  auto at = [&](double rp, double h) {
    Point x = c;
    x[0] += rp;
    x[N - 1] += h;
    return I(x);
  };
  for (int a = 1; a < grid; ++a) {
    const double h = R * (-1.0 + 2.0 * a / grid);
    const double top = std::sqrt(std::max(R * R - h * h, 0.0));
    double prev = at(0.0, h);
    for (int b = 1; b < grid; ++b) {
      const double v = at(top * b / grid, h);
      ++rep.radial_pairs;
      if (v > prev + slack) ++rep.radial_violations;
      prev = v;
    }
  }
  for (int a = 0; a < grid; ++a) {
    const double rp = R * a / grid;
    const double top = std::sqrt(std::max(R * R - rp * rp, 0.0));
    double prev = at(rp, 0.0);
    for (int b = 1; b < grid; ++b) {
      const double v = at(rp, top * b / grid);
      ++rep.axial_pairs;
      if (v > prev + slack) ++rep.axial_violations;
      prev = v;
    }
  }
  return rep;
}

/// Smooth bump exp(-1/(1 - |y|^2)) carried to B_radius(center).
struct BumpTest {
  Point center;
  double radius = 0.5;

  double operator()(const Point& x) const {
    const double r2 = (x - center).norm2() / (radius * radius);
    return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
  }
};

/// Three bumps on the axis of B_1(e_N): at the centre, towards the singular
/// pole and towards the far pole.
inline std::vector<BumpTest> builtin_bump_tests(int N) {
  return {{Point::axis(N, 1.0), 0.6}, {Point::axis(N, 0.6), 0.35}, {Point::axis(N, 1.3), 0.35}};
}

/// Radial profile L(r) = (-Delta)^a of the unit bump at distance r from its
/// centre, tabulated once and interpolated.
class BumpOperatorTable {
 public:
  BumpOperatorTable(int N, double alpha, double cN, const QuadratureSpec& q = {}) : N_(N), alpha_(alpha) {
    EvaluableFunction fn;
    const BumpTest unit{Point(N), 1.0};
    fn.f = unit;
    fn.center = Point(N);
    fn.support_radius = 1.0;
    fn.smoothness_radius = [](const Point&) { return 0.25; };  // C-infinity, varies on that scale
    for (int k = 0; k <= kInner; ++k) r_.push_back(kInnerMax * k / kInner);
    for (int k = 1; k <= kOuter; ++k) r_.push_back(kInnerMax * std::pow(kOuterMax / kInnerMax, double(k) / kOuter));
    for (double r : r_) {
      Point x(N);
      x[0] = r;
      v_.push_back(frac_laplacian_point(fn, x, alpha, cN, q));
    }
    mass_ = -cN * bump_mass(N);  // far field -c_{N,a} |x|^{-N-2a} int bump
  }

  /// (-Delta)^a of the bump of the given radius centred at distance d.
  double operator()(double d, double radius) const {
    const double r = d / radius;
    const double scale = std::pow(radius, -2.0 * alpha_);
    if (r >= r_.back()) return scale * mass_ * std::pow(r, -N_ - 2.0 * alpha_);
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const std::size_t k = std::min<std::size_t>(it - r_.begin(), r_.size() - 1);
    const double t = (r - r_[k - 1]) / (r_[k] - r_[k - 1]);
    if (r_[k - 1] > 1.0 + 1e-9) {
      // the tail is a power law: interpolate in log-log
      const double a = std::log(-v_[k - 1]), b = std::log(-v_[k]);
      const double la = std::log(r_[k - 1]), lb = std::log(r_[k]);
      return -scale * std::exp(a + (b - a) * (std::log(r) - la) / (lb - la));
    }
    return scale * ((1.0 - t) * v_[k - 1] + t * v_[k]);
  }

  static double bump_mass(int N) {
    QuadratureSpec q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-12;
    const double radial = integrate([N](double r) { return std::exp(-1.0 / (1.0 - r * r)) * std::pow(r, N - 1); },
                                    0.0, 1.0, q).value;
    return detail::sphere_measure(N - 1) * radial;
  }

 private:
  static constexpr int kInner = 240;
  static constexpr double kInnerMax = 1.2;
  static constexpr int kOuter = 60;
  static constexpr double kOuterMax = 40.0;
  int N_;
  double alpha_;
  double mass_ = 0.0;
  std::vector<double> r_, v_;
};

struct WeakResidual {
  double residual = 0.0;   // |int u (-Delta)^a xi + u^p xi - int xi f|
  double reference = 0.0;  // |int xi f|
  double relative() const { return reference > 0.0 ? residual / reference : residual; }
};

/// Weak form against bump tests. Integrals run over every cell with a 4 x 4
/// Gauss rule in the mesh parameters on the interpolated u and source, since
/// the tests vary on a scale finer than the cells away from the pole. With
/// absorption = false the u^p term is dropped (linear problem).
inline std::vector<WeakResidual> weak_residual(const Mesh& mesh, const Field& u, double p, const Field& source,
                                               const std::vector<BumpTest>& tests, const BumpOperatorTable& table,
                                               bool absorption = true) {
  u.check_against(mesh);
  source.check_against(mesh);
  for (const BumpTest& t : tests)
    if (!(t.radius > 0.0) || (t.center - mesh.domain.center).norm() + t.radius > mesh.domain.radius + 1e-12)
      throw DomainError("weak_residual: test function support escapes the ball");
  const FieldInterpolant U(mesh, u), F(mesh, source);
  const GaussRule& g = gauss_legendre(4);
  const double ring = mesh.axisymmetric() ? 2.0 * std::numbers::pi : 1.0;
  std::vector<double> lhs(tests.size(), 0.0), rhs(tests.size(), 0.0);
  for (int k = 0; k < mesh.size(); ++k) {
    const double xa = mesh.radial_index(k) * mesh.dxi();
    const double pa = mesh.eta_min() + mesh.angular_index(k) * mesh.deta();
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const double xi = xa + 0.5 * mesh.dxi() * (1.0 + g.x[a]);
        const double ph = pa + 0.5 * mesh.deta() * (1.0 + g.x[b]);
        const double w = 0.25 * g.w[a] * g.w[b] * mesh.dxi() * mesh.deta() * ring * mesh.jacobian(xi, ph);
        const Point x = mesh.map(xi, ph);
        const double uv = U(x), fv = F(x);
        for (std::size_t t = 0; t < tests.size(); ++t) {
          const double bump = tests[t](x);
          double term = uv * table((x - tests[t].center).norm(), tests[t].radius);
          if (absorption) term += std::pow(std::max(uv, 0.0), p) * bump;
          lhs[t] += w * term;
          rhs[t] += w * bump * fv;
        }
      }
  }
  std::vector<WeakResidual> out;
  for (std::size_t t = 0; t < tests.size(); ++t) out.push_back({std::abs(lhs[t] - rhs[t]), std::abs(rhs[t])});
  return out;
}

struct TracePoint {
  double t = 0.0;
  double value = std::numeric_limits<double>::quiet_NaN();
  bool resolved = false;
};

/// Index of the node column closest to the axis through the pole. For N = 3
/// no column lies on the axis; the first one stands in for it.
inline int axis_column(const Mesh& mesh) {
  int best = 0;
  for (int j = 1; j < mesh.n_angular; ++j)
    if (std::abs(mesh.eta_node(j)) < std::abs(mesh.eta_node(best))) best = j;
  return best;
}

/// u at distance t from the pole along the inward axis, interpolated
/// piecewise linearly in (log r, log u) between the nodes of the axis column.
/// t outside the column's node range is flagged unresolved.
inline std::vector<TracePoint> axis_trace(const Mesh& mesh, const Field& u, const std::vector<double>& t_list) {
  u.check_against(mesh);
  const int j = axis_column(mesh);
  const Point pole = mesh.domain.south_pole();
  std::vector<double> r, v;
  for (int i = 0; i < mesh.n_radial; ++i) {
    r.push_back((mesh.nodes[mesh.index(i, j)] - pole).norm());
    v.push_back(u[mesh.index(i, j)]);
  }
  std::vector<TracePoint> out;
  for (double t : t_list) {
    TracePoint tp;
    tp.t = t;
    if (t >= r.front() && t <= r.back()) {
      const std::size_t k = std::min<std::size_t>(std::upper_bound(r.begin(), r.end(), t) - r.begin(), r.size() - 1);
      const double r0 = r[k - 1], r1 = r[k], v0 = v[k - 1], v1 = v[k];
      const double s = (std::log(t) - std::log(r0)) / (std::log(r1) - std::log(r0));
      tp.value = v0 > 0.0 && v1 > 0.0 ? std::exp(std::log(v0) + s * (std::log(v1) - std::log(v0)))
                                      : v0 + s * (v1 - v0);
      tp.resolved = true;
    }
    out.push_back(tp);
  }
  return out;
}

}  // namespace fracball
