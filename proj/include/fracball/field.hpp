#pragma once

// Node-sampled functions on a Mesh and their polar interpolant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fracball/errors.hpp"
#include "fracball/geometry.hpp"

namespace fracball {

struct Field {
  std::uint64_t mesh_hash = 0;
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[i]; }
  double& operator[](int i) { return values[i]; }

  static Field constant(const Mesh& m, double v) { return {m.mesh_hash, std::vector<double>(m.size(), v)}; }

  static Field sample(const Mesh& m, const std::function<double(const Point&)>& f) {
    Field out{m.mesh_hash, std::vector<double>(m.size())};
    for (int k = 0; k < m.size(); ++k) out.values[k] = f(m.nodes[k]);
    return out;
  }

  void check_against(const Mesh& m) const {
    if (mesh_hash != m.mesh_hash || size() != m.size())
      throw MeshMismatchError("Field does not belong to mesh " + hash_hex(m.mesh_hash));
    for (double v : values)
      if (!std::isfinite(v)) throw DomainError("Field contains non-finite values");
  }

  double sup_norm() const {
    double s = 0.0;
    for (double v : values) s = std::max(s, std::abs(v));
    return s;
  }
};

inline double sup_distance(const Field& a, const Field& b) {
  if (a.mesh_hash != b.mesh_hash || a.size() != b.size())
    throw MeshMismatchError("sup_distance: fields live on different meshes");
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

/// Bilinear interpolation in the mesh parameters (xi, eta) between node
/// centres, extended by zero outside the ball. Towards the outer boundary
/// (xi -> 1) the last node column is blended linearly to zero; below the
/// first radial node and beyond the outermost angular nodes values are held
/// constant, which for N = 3 is the mirror image across the axis.
class FieldInterpolant {
 public:
  FieldInterpolant(const Mesh& mesh, Field field) : mesh_(&mesh), field_(std::move(field)) {
    field_.check_against(mesh);
  }

  const Mesh& mesh() const { return *mesh_; }
  const Field& field() const { return field_; }

  double operator()(const Point& x) const {
    const Mesh& m = *mesh_;
    if (!m.domain.contains(x)) return 0.0;
    const auto [xi, eta] = m.parameters(x);
    const double fi = xi / m.dxi() - 0.5;
    const double fj = (eta - m.eta_min()) / m.deta() - 0.5;
    const int nj = m.n_angular, ni = m.n_radial;

    double tj = std::clamp(fj, 0.0, static_cast<double>(nj - 1));
    int j0 = std::min(static_cast<int>(std::floor(tj)), nj - 2);
    double wj = tj - j0;
    if (nj == 1) j0 = 0, wj = 0.0;

    auto column = [&](int j) {
      if (fi <= 0.0) return field_[m.index(0, j)];
      if (fi >= ni - 1) {
        const double last = field_[m.index(ni - 1, j)];
        const double t = std::clamp((fi - (ni - 1)) / 0.5, 0.0, 1.0);  // xi = 1 sits half a cell out
        return (1.0 - t) * last;
      }
      const int i0 = static_cast<int>(std::floor(fi));
      const double wi = fi - i0;
      return (1.0 - wi) * field_[m.index(i0, j)] + wi * field_[m.index(i0 + 1, j)];
    };
    const double a = column(j0);
    if (wj == 0.0) return a;
    return (1.0 - wj) * a + wj * column(j0 + 1);
  }

  /// Two local cell widths, the radius within which the interpolant is trusted.
  double smoothness_radius(const Point& x) const {
    const Mesh& m = *mesh_;
    const double xi = m.parameters(x).first, g = m.grading_exponent;
    const double dr = 2.0 * m.domain.radius * g * std::pow(std::max(xi, m.dxi()), g - 1.0) * m.dxi();
    const double r = m.radius_at(xi);
    return 2.0 * std::max(dr, r * m.aperture(r) * m.deta());
  }

 private:
  const Mesh* mesh_;
  Field field_;
};

}  // namespace fracball
