#include <doctest.h>

#include <cmath>

#include "hmap/errors.hpp"
#include "hmap/metric.hpp"

using namespace hmap;
using doctest::Approx;

namespace {

MetricField sheared(double eps) {
  const auto one = Expression::constant(1.0);
  const auto zero = Expression::constant(0.0);
  return metrics::custom({one, Expression::constant(eps), zero, one, zero, one});
}

// Closed form for e^{2f}δ: R = e^{-2f}(-4Δf - 2|∇f|²).
double conformal_scalar_oracle(const Vec3& x) {
  // f = 0.1 x3 sin(πx1) cos(πx2)
  const double s1 = std::sin(kPi * x[0]), c1 = std::cos(kPi * x[0]);
  const double s2 = std::sin(kPi * x[1]), c2 = std::cos(kPi * x[1]);
  const double f = 0.1 * x[2] * s1 * c2;
  const Vec3 grad(0.1 * x[2] * kPi * c1 * c2, -0.1 * x[2] * kPi * s1 * s2, 0.1 * s1 * c2);
  const double lap = -2.0 * kPi * kPi * f;
  return std::exp(-2 * f) * (-4 * lap - 2 * grad.squaredNorm());
}

}  // namespace

TEST_CASE("inverse of a sheared metric") {
  const double eps = 0.1;
  const Mat3 inv = inverse_metric(sheared(eps)(Vec3(0.5, 0.5, 0.5)));
  const double d = 1 - eps * eps;
  CHECK(inv(0, 0) == Approx(1 / d));
  CHECK(inv(0, 1) == Approx(-eps / d));
  CHECK(inv(2, 2) == Approx(1));
  CHECK(inv(0, 2) == Approx(0));
}

TEST_CASE("degenerate metric is rejected") {
  const auto zero = Expression::constant(0.0);
  const auto one = Expression::constant(1.0);
  const MetricField m = metrics::custom({one, one, zero, one, zero, one});
  CHECK_THROWS_AS(christoffel(m, Vec3(0.5, 0.5, 0.5)), DegenerateMetricError);
  try {
    inverse_metric(m(Vec3(0.5, 0.5, 0.5)));
  } catch (const DegenerateMetricError& e) {
    CHECK(std::abs(e.eigenvalue()) < 1e-10);
  }
}

TEST_CASE("conformal metric in x3") {
  const double eps = 0.3;
  const MetricField m = metrics::conformal(Expression::parse("0.3*x3"));
  const Vec3 x(0.2, 0.6, 0.4);
  const Christoffel G = christoffel(m, x);
  // Γ^k_ij = δ_ik f_j + δ_jk f_i - δ_ij f_k with ∇f = ε e3
  CHECK(G[2](2, 2) == Approx(eps));
  CHECK(G[2](0, 0) == Approx(-eps));
  CHECK(G[0](0, 2) == Approx(eps));
  CHECK(G[0](1, 1) == Approx(0).epsilon(1e-14));
  CHECK(scalar_curvature(m, x) == Approx(-2 * eps * eps * std::exp(-2 * eps * 0.4)));

  const FaceGeometry b = face_geometry(m, Face::B, Vec3(0.3, 0.7, 0.0));
  CHECK(b.mean_curvature == Approx(-2 * eps));
  CHECK(b.outward_normal[2] == Approx(-1));
  CHECK(b.area_density == Approx(std::exp(2 * eps * 0.0)));
  const FaceGeometry t = face_geometry(m, Face::T, Vec3(0.3, 0.7, 1.0));
  CHECK(t.mean_curvature == Approx(2 * eps * std::exp(-eps)));
  CHECK(t.area_density == Approx(std::exp(2 * eps)));
}

TEST_CASE("warped metric Christoffel symbols") {
  const MetricField m = metrics::warped(Expression::parse("1 + 0.2*x1"));
  const Vec3 x(0.7, 0.1, 0.5);
  const Christoffel G = christoffel(m, x);
  CHECK(G[0](2, 2) == Approx(-0.2 * (1 + 0.2 * 0.7)));
  CHECK(G[2](0, 2) == Approx(0.2 / (1 + 0.2 * 0.7)));
  CHECK(G[2](2, 0) == Approx(0.2 / (1 + 0.2 * 0.7)));
  CHECK(G[1](1, 1) == Approx(0).epsilon(1e-14));
  // Warped products over a flat base with affine φ are flat.
  CHECK(std::abs(scalar_curvature(m, x)) < 1e-12);
}

TEST_CASE("scalar curvature of a non-separable conformal factor") {
  const MetricField analytic = metrics::conformal(Expression::parse("0.1*x3*sin(pi*x1)*cos(pi*x2)"));
  const MetricField fd = analytic.with_finite_differences(1e-3);
  for (const Vec3& x : {Vec3(0.3, 0.4, 0.5), Vec3(0.9, 0.2, 0.1), Vec3(0.0, 0.5, 1.0)}) {
    const double oracle = conformal_scalar_oracle(x);
    CHECK(scalar_curvature(analytic, x) == Approx(oracle).epsilon(1e-10));
    CHECK(std::abs(scalar_curvature(fd, x) - oracle) < 1e-5);
  }
}

TEST_CASE("finite-difference jets converge at fourth order") {
  const MetricField analytic = metrics::conformal(Expression::parse("0.4*sin(x1 + 2*x2)*x3"));
  for (const Vec3& x : {Vec3(0.5, 0.5, 0.5), Vec3(0.02, 0.5, 0.97)}) {
    const MetricJet exact = analytic.jet(x, 2);
    double err[2];
    const double steps[2] = {0.1, 0.05};
    for (int k = 0; k < 2; ++k) {
      const MetricJet approx = analytic.with_finite_differences(steps[k]).jet(x, 2);
      err[k] = 0;
      for (int m = 0; m < 3; ++m) err[k] = std::max(err[k], (approx.dg[m] - exact.dg[m]).norm());
    }
    CHECK(err[0] / err[1] > 10.0);
  }
}

TEST_CASE("dihedral angles") {
  const MetricField m = sheared(0.1);
  CHECK(dihedral_angle(m, all_edges()[0], Vec3(0, 0, 0.5)) == Approx(std::acos(0.1)));
  CHECK(dihedral_angle(m, all_edges()[4], Vec3(0.0, 0.5, 0.0)) == Approx(kPi / 2));
  CHECK_THROWS_AS(dihedral_angle(m, all_edges()[0], Vec3(0, 0, 0)), DomainError);
  CHECK_THROWS_AS(dihedral_angle(m, all_edges()[0], Vec3(0.5, 0, 0.5)), DomainError);

  const RightAngleReport bad = validate_right_angled_metric(m, 5);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_offdiag == Approx(0.1));
  const RightAngleReport good =
      validate_right_angled_metric(metrics::conformal(Expression::parse("0.1*sin(pi*x1)*sin(pi*x2)")), 9);
  CHECK(good.pass);
}

TEST_CASE("metric hash is deterministic and description-sensitive") {
  const MetricField a = metrics::conformal(Expression::parse("0.1*x3"));
  const MetricField b = metrics::conformal(Expression::parse("0.1*x3"));
  const MetricField c = metrics::conformal(Expression::parse("0.2*x3"));
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}

TEST_CASE("homotopy endpoints") {
  const MetricField target = metrics::conformal(Expression::parse("0.2*x3"));
  const Vec3 x(0.1, 0.2, 0.3);
  CHECK((metrics::homotopy(target, 0.0)(x) - Mat3::Identity()).norm() < 1e-14);
  CHECK((metrics::homotopy(target, 1.0)(x) - target(x)).norm() < 1e-14);
  const double mid = metrics::homotopy(target, 0.5)(x)(0, 0);
  CHECK(mid == Approx(1.0 / (0.5 + 0.5 * std::exp(-0.4 * 0.3))));
}
