#pragma once

// Log-log least squares for power laws v ~ C t^slope.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fracball/errors.hpp"

namespace fracball {

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;  // log C
  double r_squared = 0.0;
  int count = 0;

  double prefactor() const { return std::exp(intercept); }
};

using Sample = std::pair<double, double>;

namespace detail {

inline std::vector<Sample> in_window(const std::vector<Sample>& samples, double t_min, double t_max,
                                     const char* who) {
  if (!(t_min < t_max)) throw DomainError(std::string(who) + ": empty window");
  std::vector<Sample> out;
  for (const auto& [t, v] : samples) {
    if (t < t_min || t > t_max) continue;
    if (!(t > 0.0) || !(v > 0.0) || !std::isfinite(t) || !std::isfinite(v))
      throw DomainError(std::string(who) + ": samples must be positive and finite");
    out.emplace_back(t, v);
  }
  if (out.size() < 4)
    throw DomainError(std::string(who) + ": need at least 4 samples in the window, got " +
                      std::to_string(out.size()));
  return out;
}

}  // namespace detail

/// Least squares of log v against log t over samples with t in [t_min, t_max].
inline PowerLawFit fit_power_law(const std::vector<Sample>& samples, double t_min, double t_max) {
  const auto w = detail::in_window(samples, t_min, t_max, "fit_power_law");
  const double n = static_cast<double>(w.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [t, v] : w) {
    mx += std::log(t);
    my += std::log(v);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [t, v] : w) {
    const double dx = std::log(t) - mx, dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw DomainError("fit_power_law: all t coincide");
  PowerLawFit f;
  f.count = static_cast<int>(w.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  // constant data: a perfect (flat) fit
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

/// Lower bound v >= c t^exponent with the exponent prescribed: c is the
/// smallest v t^{-exponent} in the window. The free log-log fit is attached
/// to judge whether the data follow a power law at all.
struct EnvelopeFit {
  double exponent = 0.0;
  double constant = 0.0;
  PowerLawFit free;
};

inline EnvelopeFit lower_envelope_fit(const std::vector<Sample>& samples, double t_min, double t_max,
                                      double exponent) {
  const auto w = detail::in_window(samples, t_min, t_max, "lower_envelope_fit");
  EnvelopeFit e;
  e.exponent = exponent;
  e.constant = std::numeric_limits<double>::infinity();
  for (const auto& [t, v] : w) e.constant = std::min(e.constant, v * std::pow(t, -exponent));
  e.free = fit_power_law(samples, t_min, t_max);
  return e;
}

}  // namespace fracball
