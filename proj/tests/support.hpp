#pragma once

// Shared helpers for the unit tests: seeded generators and small cached
// operators so that each binary assembles a given matrix once.

#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include "fracball/greenop.hpp"

namespace fbtest {

using namespace fracball;

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(20261018);
  return g;
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline Point random_in_ball(const BallDomain& ball, double shrink = 0.95) {
  while (true) {
    Point v(ball.dim);
    for (int i = 0; i < ball.dim; ++i) v[i] = uniform(-1.0, 1.0);
    if (v.norm2() < 1.0) return ball.center + v * (shrink * ball.radius);
  }
}

inline double rel(double got, double want) { return std::abs(got / want - 1.0); }

// Gamma-function closed forms, independent of the quadrature in the library.
inline double cN_closed(int N, double a) {
  return std::pow(2.0, 2.0 * a) * a * std::tgamma(0.5 * N + a) /
         (std::pow(M_PI, 0.5 * N) * std::tgamma(1.0 - a));
}

inline double symbol_closed(double s, int N, double a) {
  return std::pow(2.0, 2.0 * a) * std::tgamma(0.5 * (N - s)) * std::tgamma(0.5 * (s + 2.0 * a)) /
         (std::tgamma(0.5 * s) * std::tgamma(0.5 * (N - s - 2.0 * a)));
}

struct Setup {
  Mesh mesh;
  KernelMatrix K;
};

inline const Setup& setup(const BallDomain& ball, int M, double alpha) {
  static std::map<std::tuple<int, double, int, double>, Setup> cache;
  const auto key = std::make_tuple(ball.dim, ball.center.last(), M, alpha);
  auto it = cache.find(key);
  if (it == cache.end()) {
    Mesh m = build_graded_mesh(ball, M);
    KernelMatrix K = assemble(m, alpha);
    it = cache.emplace(key, Setup{std::move(m), std::move(K)}).first;
  }
  return it->second;
}

}  // namespace fbtest
