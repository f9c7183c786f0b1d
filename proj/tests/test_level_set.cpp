#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hmap/errors.hpp"
#include "hmap/level_set.hpp"
#include "hmap/model_oracles.hpp"

using namespace hmap;
using doctest::Approx;

namespace {

MetricField sheared(double eps) {
  const auto one = Expression::constant(1.0);
  const auto zero = Expression::constant(0.0);
  return metrics::custom({one, Expression::constant(eps), zero, one, zero, one});
}

// ∫∫ e^{2f} over the unit square for f = 0.1 sin(πx1), by Gauss–Legendre.
double conformal_slice_area() {
  std::vector<double> x, w;
  gauss_legendre(40, x, w);
  double total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) total += 0.5 * w[i] * std::exp(0.2 * std::sin(kPi * 0.5 * (x[i] + 1)));
  return total;
}

}  // namespace

TEST_CASE("Euclidean slices") {
  const MetricField m = metrics::euclidean();
  const HarmonicSolution s = solve_mixed_bvp(m, Grid(9));
  for (double theta : {0.5, 0.3}) {
    const LevelSurface L = extract_level_set(m, s, theta);
    CHECK(L.area == Approx(1).epsilon(1e-9));
    CHECK(L.chi == 1);
    CHECK(L.components == 1);
    CHECK(L.boundary_loops.size() == 1);
    CHECK(L.boundary_length == Approx(4).epsilon(1e-9));
    for (const auto& loop : L.boundary_loops)
      for (int v : loop) {
        bool on_side = false;
        for (Face f : kSideFaces) on_side = on_side || on_face(f, L.vertices[std::size_t(v)], s.grid.h() / 2);
        CHECK(on_side);
      }
    const BoundaryGeometry bg = boundary_geometry(m, s, L);
    REQUIRE(bg.corner_angles.size() == 4);
    for (double a : bg.corner_angles) CHECK(a == Approx(kPi / 2).epsilon(1e-9));
    for (const auto& v : bg.vertices)
      if (!v.corner) CHECK(std::abs(v.curvature) < 1e-9);
    const GaussBonnetResult gb = gauss_bonnet_check(m, s, L);
    CHECK(gb.residual <= 1e-6);
    CHECK(gb.reliable);
    for (int t = 0; t < int(L.triangles.size()); ++t) {
      const SurfaceGeometrySample g = second_fundamental_form(m, s, L, t, 0.0);
      CHECK(g.second_fundamental_form.norm() < 1e-8);
      CHECK(std::abs(g.gauss_curvature) < 1e-8);
    }
  }
  CHECK_THROWS_AS(extract_level_set(m, s, 0.0), DomainError);
  CHECK_THROWS_AS(extract_level_set(m, s, 1.0), DomainError);
}

TEST_CASE("slice areas in curved metrics") {
  const MetricField c = metrics::diagonal(Expression::constant(1), Expression::constant(1), Expression::constant(9));
  const HarmonicSolution sc = solve_mixed_bvp(c, Grid(9));
  CHECK(extract_level_set(c, sc, 0.5).area == Approx(1).epsilon(1e-9));

  const MetricField m = metrics::conformal(Expression::parse("0.1*sin(pi*x1)"));
  const HarmonicSolution s = solve_mixed_bvp(m, Grid(33));
  const LevelSurface L = extract_level_set(m, s, 0.4);
  CHECK(std::abs(L.area / conformal_slice_area() - 1) <= 0.01);
  const BoundaryGeometry bg = boundary_geometry(m, s, L);
  for (double a : bg.corner_angles) CHECK(a == Approx(kPi / 2).epsilon(1e-6));
}

TEST_CASE("topology counts") {
  const std::vector<Vec3> square = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  const Topology t = surface_topology(square, {{{0, 1, 2}}, {{0, 2, 3}}});
  CHECK(t.vertices == 4);
  CHECK(t.edges == 5);
  CHECK(t.faces == 2);
  CHECK(t.chi == 1);
  CHECK(t.boundary_loops == 1);

  const LevelSurface torus = torus_fixture(0.3, 0.1, 24, 12);
  CHECK(torus.chi == 0);
  CHECK(torus.components == 1);
  CHECK(torus.boundary_loops.empty());

  const std::vector<Vec3> fan = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)};
  try {
    surface_topology(fan, {{{0, 1, 2}}, {{1, 0, 3}}, {{0, 1, 4}}});
    FAIL("expected TopologyError");
  } catch (const TopologyError& e) {
    CHECK(e.edge() == 0);
  }

  LevelSurface broken;
  broken.vertices = square;
  broken.boundary_loops = {{0, 1}};
  const HarmonicSolution s = solve_mixed_bvp(metrics::euclidean(), Grid(9));
  CHECK_THROWS_AS(boundary_geometry(metrics::euclidean(), s, broken), TopologyError);
}

TEST_CASE("second fundamental form oracles") {
  const MetricField slab = metrics::warped(Expression::parse("1 + 0.3*x3^2"));
  const HarmonicSolution s = solve_mixed_bvp(slab, Grid(17));
  const LevelSurface L = extract_level_set(slab, s, 0.5);
  double worst = 0;
  for (int t = 0; t < int(L.triangles.size()); ++t)
    worst = std::max(worst, second_fundamental_form(slab, s, L, t, 0.0).second_fundamental_form.norm());
  CHECK(worst < 1e-6);

  const MetricField e = metrics::euclidean();
  const double r = 0.3;
  const HarmonicSolution sphere =
      synthetic_solution(e, Grid(65), [](const Vec3& x) { return (x - Vec3(0.5, 0.5, 0.5)).norm(); });
  const LevelSurface S = extract_level_set(e, sphere, r);
  CHECK(S.chi == 2);
  CHECK(S.area == Approx(4 * kPi * r * r).epsilon(0.01));
  double max_dev = 0, gauss = 0;
  for (int t = 0; t < int(S.triangles.size()); ++t) {
    const SurfaceGeometrySample g = second_fundamental_form(e, sphere, S, t, 0.0);
    max_dev = std::max(max_dev, (g.second_fundamental_form - Eigen::Matrix2d::Identity() / r).norm() * r);
    gauss += g.gauss_curvature * g.area;
  }
  CHECK(max_dev <= 0.05);
  CHECK(gauss == Approx(4 * kPi).epsilon(0.02));
}

TEST_CASE("synthetic torus closes Gauss-Bonnet") {
  const MetricField e = metrics::euclidean();
  const HarmonicSolution torus = synthetic_solution(e, Grid(65), [](const Vec3& x) {
    const double rho = std::hypot(x[0] - 0.5, x[1] - 0.5);
    return (rho - 0.25) * (rho - 0.25) + (x[2] - 0.5) * (x[2] - 0.5);
  });
  const LevelSurface T = extract_level_set(e, torus, 0.01);
  CHECK(T.chi == 0);
  CHECK(T.boundary_loops.empty());
  const GaussBonnetResult gb = gauss_bonnet_check(e, torus, T);
  CHECK(gb.residual <= 0.05 * 2 * kPi);
}

TEST_CASE("turning angles follow the dihedral angles") {
  const MetricField m = sheared(0.1);
  const HarmonicSolution s = solve_mixed_bvp(m, Grid(17));
  const LevelSurface L = extract_level_set(m, s, 0.5);
  const BoundaryGeometry bg = boundary_geometry(m, s, L);
  REQUIRE(bg.corner_angles.size() == 4);
  CHECK(bg.max_corner_deviation <= 2 * kPi / 180);
  CHECK(std::abs(bg.corner_angles[0] - kPi / 2) > 0.05);
  const GaussBonnetResult gb = gauss_bonnet_check(m, s, L);
  CHECK(gb.residual <= 1e-6);
}

TEST_CASE("Gauss-Bonnet on a curved slice") {
  const MetricField m = metrics::conformal(Expression::parse("0.1*x3*sin(pi*x1)"));
  const HarmonicSolution s = solve_mixed_bvp(m, Grid(33));
  for (double theta : {0.25, 0.5, 0.75}) {
    const LevelSurface L = extract_level_set(m, s, theta);
    CHECK(L.chi == 1);
    const GaussBonnetResult gb = gauss_bonnet_check(m, s, L);
    MESSAGE("theta " << theta << " GB residual " << gb.residual << " K " << gb.gauss_integral << " kappa "
                     << gb.geodesic_integral << " gamma " << gb.turning_sum);
    CHECK(gb.residual <= 0.05 * 2 * kPi);
  }
}

TEST_CASE("coarea formula") {
  const MetricField e = metrics::euclidean();
  const CoareaReport flat = coarea_scan(e, solve_mixed_bvp(e, Grid(9)), 16);
  CHECK(flat.volume_side[0] == Approx(1).epsilon(1e-12));
  CHECK(flat.discrepancy[0] <= 1e-6);
  CHECK(std::abs(flat.volume_side[1]) <= 1e-8);
  CHECK(std::abs(flat.level_side[1]) <= 1e-8);
  CHECK_THROWS_AS(coarea_scan(e, solve_mixed_bvp(e, Grid(9)), 8), DomainError);

  const MetricField m = metrics::conformal(Expression::parse("0.1*x3*sin(pi*x1)"));
  const CoareaReport c = coarea_scan(m, solve_mixed_bvp(m, Grid(33)), 32);
  MESSAGE("coarea discrepancies " << c.discrepancy[0] << " " << c.discrepancy[1] << " " << c.discrepancy[2]);
  CHECK(c.discrepancy[0] <= 0.02);
  CHECK(c.critical_values.empty());
}

TEST_CASE("level nesting") {
  const MetricField m = metrics::conformal(Expression::parse("0.2*x3*sin(pi*x1)*sin(pi*x2)"));
  const HarmonicSolution s = solve_mixed_bvp(m, Grid(17));
  std::size_t previous = 0;
  for (int k = 1; k < 16; ++k) {
    const double theta = k / 16.0 + 0.01;
    const std::size_t below = std::size_t(std::count_if(s.u.values.begin(), s.u.values.end(), [&](double v) { return v < theta; }));
    CHECK(below > previous);
    previous = below;
    CHECK(extract_level_set(m, s, theta).chi == 1);
  }
}

TEST_CASE("OFF export") {
  const MetricField e = metrics::euclidean();
  const LevelSurface L = extract_level_set(e, solve_mixed_bvp(e, Grid(9)), 0.3);
  const auto path = std::filesystem::temp_directory_path() / "hmap_level.off";
  write_off(path.string(), L);
  std::ifstream in(path);
  std::string magic;
  std::size_t v, f, zero;
  in >> magic >> v >> f >> zero;
  CHECK(magic == "OFF");
  CHECK(v == L.vertices.size());
  CHECK(f == L.triangles.size());
  std::filesystem::remove(path);
}
