#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fracball/field.hpp"
#include "fracball/greenop.hpp"
#include "support.hpp"

using namespace fracball;
using fbtest::rel;
namespace fs = std::filesystem;

namespace {

const fbtest::Setup& centred(int M, double a = 0.5) { return fbtest::setup(BallDomain::unit_centered(2), M, a); }
const fbtest::Setup& shifted(int M, double a = 0.5) { return fbtest::setup(BallDomain::unit_shifted(2), M, a); }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "fracball-tests";
  fs::create_directories(d);
  return d / name;
}

ProblemParams params(double a) {
  ProblemParams P;
  P.alpha = a;
  return P;
}

}  // namespace

TEST(Assemble, EntriesNonnegativeAndWeightedSymmetric) {
  for (const auto* S : {&centred(12), &shifted(12, 0.3), &fbtest::setup(BallDomain::unit_shifted(3), 8, 0.7)}) {
    EXPECT_GE(S->K.entries.minCoeff(), 0.0);
    EXPECT_LE(weighted_symmetry_defect(S->K, S->mesh), 1e-8);
    EXPECT_EQ(S->K.mesh_hash, S->mesh.mesh_hash);
    EXPECT_EQ(S->K.size(), S->mesh.size());
  }
}

TEST(Torsion, CentreValueTwoOverPi) {
  const auto& S = centred(24);
  const Field v = torsion(S.mesh, S.K);
  EXPECT_LT(rel(FieldInterpolant(S.mesh, v)(Point(2)), 2.0 / std::numbers::pi), 0.02);
  EXPECT_NEAR(torsion_center_value(2, 0.5), 2.0 / std::numbers::pi, 1e-14);
}

TEST(Torsion, MatchesClosedFormInSupNorm) {
  for (double a : {0.3, 0.5, 0.7}) {
    const auto& S = centred(24, a);
    const Field v = torsion(S.mesh, S.K), e = torsion_exact(S.mesh, a);
    EXPECT_LT(sup_distance(v, e) / e.sup_norm(), 0.03) << a;
  }
}

TEST(Torsion, ErrorDropsOnDoubling) {
  auto err = [](int M) {
    const auto& S = centred(M);
    const Field e = torsion_exact(S.mesh, 0.5);
    return sup_distance(torsion(S.mesh, S.K), e) / e.sup_norm();
  };
  EXPECT_GE(err(8) / err(16), 1.5);
}

TEST(Torsion, MaximalNearCentreAndDecaysLikeDistancePowerAlpha) {
  const double a = 0.5;
  const auto& S = centred(24, a);
  const Field v = torsion(S.mesh, S.K);
  int kmax = 0;
  for (int k = 0; k < S.mesh.size(); ++k)
    if (v[k] > v[kmax]) kmax = k;
  EXPECT_LT(S.mesh.nodes[kmax].norm(), 0.15);
  // axis column toward the far pole
  const int j = S.mesh.n_angular / 2;
  const int n = S.mesh.n_radial;
  const Point& p1 = S.mesh.nodes[S.mesh.index(n - 1, j)];
  const Point& p2 = S.mesh.nodes[S.mesh.index(n - 3, j)];
  const double slope = std::log(v[S.mesh.index(n - 1, j)] / v[S.mesh.index(n - 3, j)]) /
                       std::log(boundary_distance(S.mesh.domain, p1) / boundary_distance(S.mesh.domain, p2));
  EXPECT_NEAR(slope, a, 0.1);
}

TEST(Apply, ZeroPositiveLinearAndChecksMesh) {
  const auto& S = shifted(12);
  const Field z = Field::constant(S.mesh, 0.0);
  EXPECT_EQ(apply(S.K, z).sup_norm(), 0.0);
  Field f = z, g = z;
  for (int k = 0; k < S.mesh.size(); ++k) {
    f[k] = fbtest::uniform(0.0, 1.0);
    g[k] = fbtest::uniform(-1.0, 1.0);
  }
  const Field Af = apply(S.K, f);
  for (double x : Af.values) EXPECT_GE(x, 0.0);
  Field h = z;
  for (int k = 0; k < S.mesh.size(); ++k) h[k] = 2.0 * f[k] - 3.0 * g[k];
  const Field Ag = apply(S.K, g), Ah = apply(S.K, h);
  for (int k = 0; k < S.mesh.size(); ++k) EXPECT_NEAR(Ah[k], 2.0 * Af[k] - 3.0 * Ag[k], 1e-12);
  EXPECT_THROW(apply(S.K, Field::constant(centred(12).mesh, 1.0)), MeshMismatchError);
}

TEST(LinearSolution, MatchesPoissonKernelAtNodes) {
  const auto& S = shifted(24);
  const double cN = normalization_constant(2, 0.5), s = 0.5;
  const LinearSolution L = linear_solution(S.mesh, S.K, params(0.5), s, cN);
  EXPECT_FALSE(L.mesh_dependent);
  for (int i = 0; i < 10; ++i) {
    const int k = static_cast<int>(fbtest::rng()() % S.mesh.size());
    EXPECT_LT(rel(L.field[k], poisson_kernel(S.mesh.nodes[k], Point::axis(2, -s), S.mesh.domain, 0.5)), 0.03)
        << S.mesh.nodes[k];
  }
  for (double x : L.field.values) EXPECT_GT(x, 0.0);
}

TEST(LinearSolution, GrowsAsOffsetShrinks) {
  const auto& S = shifted(16);
  const double cN = normalization_constant(2, 0.5);
  std::vector<Point> probes = {Point::axis(2, 1.0), Point::axis(2, 0.5), Point{0.3, 1.2}, Point{-0.5, 0.9},
                               Point::axis(2, 1.7)};
  std::vector<double> prev(probes.size(), 0.0);
  for (double s : {0.4, 0.2, 0.1, 0.05}) {
    const FieldInterpolant I(S.mesh, linear_solution(S.mesh, S.K, params(0.5), s, cN).field);
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double v = I(probes[i]);
      EXPECT_GT(v, prev[i]) << s << " " << probes[i];
      prev[i] = v;
    }
  }
  EXPECT_TRUE(linear_solution(S.mesh, S.K, params(0.5), 0.0, cN).mesh_dependent);
}

TEST(MatrixCache, RoundTripIsBitExact) {
  const auto& S = shifted(8);
  const fs::path p = scratch("roundtrip.bin");
  save_matrix(S.K, p);
  const KernelMatrix L = load_matrix(p, S.mesh, 0.5);
  ASSERT_EQ(L.size(), S.K.size());
  EXPECT_EQ(std::memcmp(L.entries.data(), S.K.entries.data(), sizeof(double) * S.K.entries.size()), 0);
  EXPECT_EQ(L.mesh_hash, S.K.mesh_hash);
  EXPECT_EQ(fs::file_size(p), kMatrixHeaderBytes + 8 * S.K.entries.size());
  std::ifstream in(p, std::ios::binary);
  char magic[12];
  in.read(magic, 12);
  EXPECT_EQ(std::string(magic, 12), "FRACBALL-GK1");
}

TEST(MatrixCache, CorruptAndMismatchAreDistinct) {
  const auto& S = shifted(8);
  const fs::path p = scratch("corrupt.bin");
  save_matrix(S.K, p);
  fs::resize_file(p, fs::file_size(p) - 5);
  EXPECT_THROW(load_matrix(p, S.mesh, 0.5), CorruptFileError);
  {
    std::ofstream o(p, std::ios::binary | std::ios::trunc);
    o << "not a matrix at all, just some text long enough for a header";
  }
  EXPECT_THROW(load_matrix(p), CorruptFileError);
  save_matrix(S.K, p);
  EXPECT_THROW(load_matrix(p, shifted(9).mesh, 0.5), MeshMismatchError);
  EXPECT_THROW(load_matrix(p, S.mesh, 0.6), MeshMismatchError);
}

TEST(MatrixCache, CachedAssembleStoresThenReuses) {
  const auto& S = shifted(8);
  const fs::path p = scratch("cached.bin");
  fs::remove(p);
  const KernelMatrix A = cached_assemble(S.mesh, 0.5, p);
  ASSERT_TRUE(fs::exists(p));
  const KernelMatrix B = cached_assemble(S.mesh, 0.5, p);
  EXPECT_NE(B.meta.scheme.find("loaded"), std::string::npos);
  EXPECT_EQ(std::memcmp(A.entries.data(), B.entries.data(), sizeof(double) * A.entries.size()), 0);
  EXPECT_EQ(std::memcmp(A.entries.data(), S.K.entries.data(), sizeof(double) * A.entries.size()), 0);
}
