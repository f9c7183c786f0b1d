#include <doctest.h>

#include <cmath>

#include "hmap/errors.hpp"
#include "hmap/inequality.hpp"

using namespace hmap;
using doctest::Approx;

namespace {

MetricField conformal_bump(double eps) {
  return metrics::conformal(Expression::parse(std::to_string(eps) + "*sin(pi*x1)*sin(pi*x2)"));
}

MetricField stretched() {
  return metrics::diagonal(Expression::constant(1), Expression::constant(1), Expression::constant(4));
}

SolverConfig tight() {
  SolverConfig c;
  c.tolerance = 1e-12;
  return c;
}

struct Run {
  HarmonicSolution solution;
  LevelFamily family;
  InequalityReport report;
};

Run run(const MetricField& m, int n, InequalityVariant v = InequalityVariant::cube, int samples = 16) {
  Run r{solve_mixed_bvp(m, Grid(n), tight()), {}, {}};
  r.family = build_level_family(m, r.solution, samples);
  r.report = compute_inequality_terms(r.solution, m, r.family, v);
  return r;
}

}  // namespace

TEST_CASE("flat cube is the equality case") {
  const Run r = run(metrics::euclidean(), 33);
  const InequalityReport& rep = r.report;
  CHECK(std::abs(rep.hess_term) <= 1e-8);
  CHECK(std::abs(rep.scalar_term) <= 1e-8);
  CHECK(std::abs(rep.boundary_mean_term) <= 1e-8);
  CHECK(rep.euler_term == Approx(2 * kPi).epsilon(1e-12));
  for (const LevelRecord& l : rep.levels) CHECK(l.corner_angle_sum == Approx(2 * kPi).epsilon(1e-9));
  CHECK(std::abs(rep.turning_term) <= 1e-8);
  CHECK(std::abs(rep.slack) <= 1e-6);
  CHECK(rep.excluded_mass == 0.0);
  const VerifyResult v = verify_inequality(rep, 1e-8);
  CHECK(v.pass);
  CHECK(std::abs(v.margin - 1e-8) <= 1e-6);
}

TEST_CASE("product metric diag(1,1,4)") {
  const Run r = run(stretched(), 33);
  CHECK(std::abs(r.report.hess_term) <= 1e-8);
  CHECK(std::abs(r.report.scalar_term) <= 1e-8);
  CHECK(std::abs(r.report.boundary_mean_term) <= 1e-8);
  CHECK(std::abs(r.report.slack) <= 1e-6);
  CHECK(verify_inequality(r.report, 1e-8).pass);
}

TEST_CASE("dirichlet grouping on the flat cube") {
  const Run r = run(metrics::euclidean(), 17, InequalityVariant::dirichlet);
  CHECK(r.report.rhs == Approx(2 * kPi).epsilon(1e-12));
  CHECK(r.report.slack == Approx(2 * kPi).epsilon(1e-8));
  CHECK(verify_inequality(r.report, 1e-8).pass);
}

TEST_CASE("conformal terms against closed forms") {
  // u = x3 solves the problem exactly since f does not depend on x3, which
  // reduces every integrand to an expression in f.
  const double eps = 0.1;
  const Run r = run(conformal_bump(eps), 33);
  const double grad_sq = eps * eps * kPi * kPi / 2;  // ∫ |∇f|²
  CHECK(r.report.hess_term == Approx(grad_sq).epsilon(5e-3));
  CHECK(r.report.scalar_term == Approx(16 * eps - grad_sq).epsilon(5e-3));
  CHECK(r.report.boundary_side_term == Approx(-16 * eps).epsilon(5e-3));
  CHECK(std::abs(r.report.boundary_topbottom_term) <= 1e-12);
  CHECK(r.report.hess_term >= 0);
}

TEST_CASE("warped metric hess term") {
  // φ = 1 + 0.2 x1: the integrand reduces to φ'²/φ².
  const Run r = run(metrics::warped(Expression::parse("1+0.2*x1")), 33);
  CHECK(r.report.hess_term == Approx(0.04 * 5 * (1 - 1 / 1.2)).epsilon(1e-3));
  CHECK(std::abs(r.report.scalar_term) <= 1e-12);
}

TEST_CASE("conformal inequality holds within error bars") {
  for (double eps : {0.05, 0.1}) {
    const InequalityReport r33 = inequality_study(conformal_bump(eps), 33, InequalityVariant::cube, 32, tight());
    const InequalityReport r65 = inequality_study(conformal_bump(eps), 65, InequalityVariant::cube, 32, tight());
    REQUIRE(r33.error_estimate);
    REQUIRE(r65.error_estimate);
    CHECK(verify_inequality(r33, 1e-8).pass);
    CHECK(verify_inequality(r65, 1e-8).pass);
    CHECK(*r65.error_estimate * 2 <= *r33.error_estimate);
    const double pairs[][2] = {{r33.hess_term, r65.hess_term},
                               {r33.scalar_term, r65.scalar_term},
                               {r33.boundary_mean_term, r65.boundary_mean_term},
                               {r33.corner_angle_term, r65.corner_angle_term}};
    for (const auto& p : pairs) CHECK(std::abs(p[1] - p[0]) <= 3 * *r33.error_estimate);
  }
}

TEST_CASE("negative controls fail") {
  Run r = run(conformal_bump(0.1), 17);
  REQUIRE(verify_inequality(r.report, 1e-8).pass);

  InequalityReport flipped = r.report;
  flipped.hess_term = -flipped.hess_term;
  recompute_totals(flipped);
  CHECK_FALSE(verify_inequality(flipped, 1e-8).pass);

  InequalityReport inflated = r.report;
  inflated.boundary_mean_term += 1.0;
  recompute_totals(inflated);
  CHECK_FALSE(verify_inequality(inflated, 1e-8).pass);

  InequalityReport broken = r.report;
  broken.scalar_term = std::nan("");
  CHECK_FALSE(verify_inequality(broken, 1e-8).pass);
}

TEST_CASE("regularization stability") {
  const MetricField m = conformal_bump(0.1);
  const Run r = run(m, 17);
  const InequalityReport half = compute_inequality_terms(r.solution, m, r.family, InequalityVariant::cube,
                                                         0.5 * r.report.delta_reg);
  CHECK(std::abs(half.hess_term - r.report.hess_term) <= 0.01 * r.report.hess_term);
}

TEST_CASE("empty level family is rejected") {
  const MetricField m = metrics::euclidean();
  const HarmonicSolution s = solve_mixed_bvp(m, Grid(9));
  CHECK_THROWS_AS(compute_inequality_terms(s, m, LevelFamily{}, InequalityVariant::cube), DomainError);
}

TEST_CASE("Bochner residual") {
  SUBCASE("flat") {
    const HarmonicSolution s = solve_mixed_bvp(metrics::euclidean(), Grid(17), tight());
    const BochnerResult b = bochner_residual(s, metrics::euclidean());
    CHECK(b.max_norm <= 1e-8);
    CHECK(b.evaluated_nodes == std::size_t(11 * 11 * 11));
  }
  SUBCASE("warped") {
    const MetricField m = metrics::warped(Expression::parse("1+0.2*x1"));
    CHECK(bochner_residual(solve_mixed_bvp(m, Grid(33), tight()), m).max_norm <= 1e-6);
  }
  SUBCASE("conformal refinement") {
    const MetricField m = conformal_bump(0.05);
    const double e17 = bochner_residual(solve_mixed_bvp(m, Grid(17), tight()), m).max_norm;
    const double e33 = bochner_residual(solve_mixed_bvp(m, Grid(33), tight()), m).max_norm;
    CHECK(e33 > 0);
    CHECK(std::log2(e17 / e33) >= 1.5);
  }
  SUBCASE("x3-dependent conformal factor, away from the edges") {
    // Next to the Dirichlet/Neumann edges the solution is less regular, so
    // the order is measured on the middle half of the cube.
    const MetricField m = metrics::conformal(Expression::parse("0.1*sin(pi*x1)*x3"));
    const auto inner_max = [&](int n) {
      const HarmonicSolution s = solve_mixed_bvp(m, Grid(n), tight());
      const BochnerResult b = bochner_residual(s, m);
      double worst = 0;
      for (std::size_t p = 0; p < s.grid.size(); ++p) {
        const Vec3 x = s.grid.point(p);
        if ((x.array() >= 0.25).all() && (x.array() <= 0.75).all()) worst = std::max(worst, std::abs(b.residual.at(p)));
      }
      return worst;
    };
    CHECK(std::log2(inner_max(17) / inner_max(33)) >= 1.5);
  }
}

TEST_CASE("rigidity diagnostics") {
  SUBCASE("flat and product metrics") {
    for (const MetricField& m : {metrics::euclidean(), stretched()}) {
      const Run r = run(m, 17);
      const RigidityDiagnostics d = rigidity_diagnostics(r.solution, m, r.family);
      CHECK(d.max_hessian <= 1e-6);
      CHECK(d.max_scalar_curvature <= 1e-6);
      CHECK(d.max_mean_curvature <= 1e-6);
      CHECK(d.max_angle_deviation <= 1e-6);
      CHECK(d.flow_isometry_defect <= 1e-4);
      CHECK(d.theta_from < d.theta_to);
    }
  }
  SUBCASE("curved metric") {
    const MetricField m = metrics::conformal(Expression::parse("0.1*sin(pi*x1)*x3"));
    const Run r = run(m, 17);
    const RigidityDiagnostics d = rigidity_diagnostics(r.solution, m, r.family);
    CHECK(d.max_hessian > 1e-3);
    CHECK(d.max_scalar_curvature > 1e-3);
    CHECK(d.max_mean_curvature > 1e-3);
    CHECK(d.flow_isometry_defect > 1e-4);
    CHECK(std::isfinite(d.flow_isometry_defect));
  }
  SUBCASE("corrupted gradient leaves the cube") {
    const MetricField m = metrics::euclidean();
    Run r = run(m, 9);
    for (std::size_t p = 0; p < r.solution.grid.size(); ++p) r.solution.du.at(p, 0) = 5.0;
    CHECK_THROWS_AS(rigidity_diagnostics(r.solution, m, r.family), DomainError);
  }
}

TEST_CASE("torus bounds arithmetic") {
  TorusBoundInput in;
  in.volume = 4 * kPi;
  in.width = 1;
  CHECK(*torus_bounds(in).genus_from_width == 4.0);

  TorusBoundInput t;
  t.volume = 6;
  t.constant_c = 1;
  t.translation_length = 1;
  CHECK(*torus_bounds(t).genus_from_translation == Approx(18 / (4 * kPi) + 1).epsilon(1e-14));
  CHECK(*torus_bounds(t).genus_from_translation == Approx(2.432).epsilon(1e-3));

  TorusBoundInput e;
  e.volume = 6 * kPi;
  e.euler = 2;
  e.bilipschitz = 1;
  const TorusBounds b = torus_bounds(e);
  CHECK(std::abs(*b.entropy_lower - 1.0) <= 1e-12);
  CHECK(std::abs(*b.entropy_upper - 4.5) <= 1e-12);
  CHECK_FALSE(b.genus_from_width);

  TorusBoundInput bad = in;
  bad.width = 0;
  CHECK_THROWS_AS(torus_bounds(bad), DomainError);
  bad = e;
  bad.bilipschitz = -1;
  CHECK_THROWS_AS(torus_bounds(bad), DomainError);
}

TEST_CASE("torus bounds are monotone") {
  TorusBoundInput base;
  base.volume = 5;
  base.width = 1;
  base.constant_c = 1;
  base.translation_length = 1;
  base.euler = 2;
  base.bilipschitz = 1;
  const TorusBounds b0 = torus_bounds(base);
  for (double s : {1.1, 2.0, 10.0}) {
    TorusBoundInput v = base;
    v.volume = *base.volume * s;
    const TorusBounds bv = torus_bounds(v);
    CHECK(*bv.genus_from_width > *b0.genus_from_width);
    CHECK(*bv.genus_from_translation > *b0.genus_from_translation);
    CHECK(*bv.entropy_upper > *b0.entropy_upper);

    TorusBoundInput w = base;
    w.width = s;
    w.translation_length = s;
    w.bilipschitz = s;
    const TorusBounds bw = torus_bounds(w);
    CHECK(*bw.genus_from_width < *b0.genus_from_width);
    CHECK(*bw.genus_from_translation < *b0.genus_from_translation);
    CHECK(*bw.entropy_upper < *b0.entropy_upper);
  }
}

TEST_CASE("report serialization") {
  const Run r = run(metrics::euclidean(), 9);
  const VerifyResult v = verify_inequality(r.report, 1e-8);
  const std::string text = report_text(r.report, v);
  CHECK(text.find("variant = cube") != std::string::npos);
  CHECK(text.find("result = pass") != std::string::npos);
  CHECK(text.find("error_estimate = unavailable") != std::string::npos);
  CHECK(text == report_text(r.report, v));
  const nlohmann::json j = report_json(r.report, v);
  CHECK(j["variant"] == "cube");
  CHECK(j["pass"] == true);
  CHECK(j["error_estimate"].is_null());
  CHECK(j["euler_term"].get<double>() == Approx(2 * kPi));
  CHECK(parse_variant("dirichlet") == InequalityVariant::dirichlet);
  CHECK_THROWS_AS(parse_variant("sphere"), DomainError);
}
