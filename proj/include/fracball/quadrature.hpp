#pragma once

// Thin adaptive-quadrature layer over the QUADPACK routines shipped with GSL,
// plus cached fixed Gauss-Legendre rules.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracball/errors.hpp"

namespace fracball {

struct QuadratureSpec {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  int max_subdivisions = 200;
  // Radius beyond which far-field tails are integrated analytically.
  double outer_cutoff = 64.0;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
      throw DomainError("QuadratureSpec: tolerances must be positive");
    if (max_subdivisions < 1)
      throw DomainError("QuadratureSpec: max_subdivisions must be >= 1");
    if (!(outer_cutoff > 2.0))
      throw DomainError("QuadratureSpec: outer_cutoff must exceed 2");
  }

  // Spec used for integrals nested inside another adaptive integral.
  QuadratureSpec tightened(double factor) const {
    QuadratureSpec t = *this;
    t.abs_tol *= factor;
    t.rel_tol *= factor;
    return t;
  }
};

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  int status = 0;  // GSL status code; 0 on success
  bool ok() const { return status == 0; }
};

class QuadratureFailure : public std::runtime_error {
 public:
  QuadratureFailure(const std::string& what, double best, double err)
      : std::runtime_error(what), best_estimate(best), error_bound(err) {}
  double best_estimate;
  double error_bound;
};

namespace detail {

inline void quiet_gsl() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

struct WorkspaceDeleter {
  void operator()(gsl_integration_workspace* w) const { gsl_integration_workspace_free(w); }
};
using Workspace = std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter>;

template <class F>
double trampoline(double x, void* params) {
  return (*static_cast<F*>(params))(x);
}

// EROUND means QUADPACK stopped because roundoff dominates; the estimate is
// still the best available and the reported error is honest.
inline bool acceptable(int status) { return status == GSL_SUCCESS || status == GSL_EROUND; }

}  // namespace detail

enum class Rule {
  smooth,    // qag, 21-point Gauss-Kronrod
  singular,  // qags, with Wynn epsilon extrapolation for endpoint singularities
};

// Never throws; callers inside other integrands inspect `status`.
template <class F>
QuadResult integrate_nothrow(F&& f, double a, double b, const QuadratureSpec& q,
                             std::span<const double> breaks = {}, Rule rule = Rule::singular) {
  detail::quiet_gsl();
  QuadResult r;
  if (a == b) return r;
  using Fn = std::remove_reference_t<F>;
  gsl_function gf;
  gf.function = &detail::trampoline<Fn>;
  gf.params = const_cast<void*>(static_cast<const void*>(&f));
  const auto limit = static_cast<size_t>(q.max_subdivisions);
  detail::Workspace ws(gsl_integration_workspace_alloc(limit));

  std::vector<double> pts;
  const double lo = std::min(a, b), hi = std::max(a, b);
  for (double x : breaks)
    if (x > lo && x < hi) pts.push_back(x);

  int status;
  if (!pts.empty()) {
    pts.push_back(lo);
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    status = gsl_integration_qagp(&gf, pts.data(), pts.size(), q.abs_tol, q.rel_tol, limit,
                                  ws.get(), &r.value, &r.abs_error);
    if (a > b) r.value = -r.value;
  } else if (rule == Rule::smooth) {
    status = gsl_integration_qag(&gf, a, b, q.abs_tol, q.rel_tol, limit, GSL_INTEG_GAUSS21,
                                 ws.get(), &r.value, &r.abs_error);
  } else {
    status = gsl_integration_qags(&gf, a, b, q.abs_tol, q.rel_tol, limit, ws.get(), &r.value,
                                  &r.abs_error);
  }
  r.status = detail::acceptable(status) ? 0 : status;
  return r;
}

template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadratureSpec& q,
                     std::span<const double> breaks = {}, Rule rule = Rule::singular) {
  QuadResult r = integrate_nothrow(std::forward<F>(f), a, b, q, breaks, rule);
  if (!r.ok()) {
    std::ostringstream os;
    os << "quadrature failed on [" << a << ", " << b << "]: " << gsl_strerror(r.status)
       << " (best " << r.value << " +/- " << r.abs_error << ")";
    throw QuadratureFailure(os.str(), r.value, r.abs_error);
  }
  return r;
}

// Accumulates the worst outcome of many inner integrals evaluated inside an
// outer integrand, where exceptions cannot cross the C callback boundary.
struct InnerLog {
  int status = 0;
  double max_rel_error = 0.0;
  void record(const QuadResult& r) {
    if (!r.ok() && status == 0) status = r.status;
    const double scale = std::abs(r.value);
    if (scale > 0.0) max_rel_error = std::max(max_rel_error, r.abs_error / scale);
  }
  void raise_if_failed(const char* where, double best, double err) const {
    if (status != 0)
      throw QuadratureFailure(std::string(where) + ": inner quadrature failed: " +
                                  gsl_strerror(status),
                              best, err);
  }
};

// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

inline const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    auto rule = std::make_unique<GaussRule>();
    gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(static_cast<size_t>(n));
    rule->x.resize(n);
    rule->w.resize(n);
    for (int i = 0; i < n; ++i)
      gsl_integration_glfixed_point(-1.0, 1.0, static_cast<size_t>(i), &rule->x[i], &rule->w[i], t);
    gsl_integration_glfixed_table_free(t);
    slot = std::move(rule);
  }
  return *slot;
}

// Fixed-order Gauss-Legendre on [a, b].
template <class F>
double gauss_integrate(F&& f, double a, double b, int n) {
  const GaussRule& g = gauss_legendre(n);
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += g.w[i] * f(c + h * g.x[i]);
  return s * h;
}

}  // namespace fracball
