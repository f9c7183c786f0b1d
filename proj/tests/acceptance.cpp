// One line per acceptance criterion; exit status is nonzero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hmap/bvp.hpp"
#include "hmap/errors.hpp"
#include "hmap/inequality.hpp"
#include "hmap/level_set.hpp"
#include "hmap/model_oracles.hpp"

using namespace hmap;

namespace {

using Clock = std::chrono::steady_clock;

struct Line {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAIL]");
  }
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

SolverConfig tight() {
  SolverConfig c;
  c.tolerance = 1e-12;
  return c;
}

MetricField bump(double eps) {
  return metrics::conformal(Expression::parse(std::to_string(eps) + "*sin(pi*x1)*sin(pi*x2)"));
}

Line flat_cube() {
  Line l;
  const auto t0 = Clock::now();
  const MetricField m = metrics::euclidean();
  const HarmonicSolution s = solve_mixed_bvp(m, Grid(33), tight());
  double u_err = 0;
  for (std::size_t p = 0; p < s.grid.size(); ++p) u_err = std::max(u_err, std::abs(s.u.at(p) - s.grid.point(p)[2]));
  const LevelFamily fam = build_level_family(m, s, 32);
  const InequalityReport r = compute_inequality_terms(s, m, fam, InequalityVariant::cube);
  double term = std::max({std::abs(r.hess_term), std::abs(r.scalar_term), std::abs(r.boundary_mean_term)});
  double angle = 0;
  for (const BoundaryGeometry& bg : fam.boundaries) {
    for (double a : bg.corner_angles) angle = std::max(angle, std::abs(a - kPi / 2));
    for (double a : bg.smooth_corner_angles) angle = std::max(angle, std::abs(a - kPi / 2));
  }
  const double dt = seconds_since(t0);
  l.require(u_err <= 1e-9, "max|u - x3| = " + num(u_err));
  l.require(term <= 1e-8, "max term = " + num(term));
  l.require(std::abs(r.slack) <= 1e-6, "slack = " + num(r.slack));
  l.require(angle <= 1e-6, "max|gamma - pi/2| = " + num(angle));
  l.require(dt < 10, "time " + num(dt) + " s");
  return l;
}

Line inequality_sign() {
  Line l;
  const auto t0 = Clock::now();
  for (double eps : {0.05, 0.1}) {
    const InequalityReport c = inequality_study(bump(eps), 33, InequalityVariant::cube, 32, tight());
    const InequalityReport f = inequality_study(bump(eps), 65, InequalityVariant::cube, 32, tight());
    const bool pc = verify_inequality(c, 1e-8).pass, pf = verify_inequality(f, 1e-8).pass;
    const double shrink = *c.error_estimate / *f.error_estimate;
    l.require(pc && pf, "eps " + num(eps) + " slack " + num(c.slack) + " +- " + num(*c.error_estimate) + " (33), " +
                            num(f.slack) + " +- " + num(*f.error_estimate) + " (65)");
    l.require(shrink >= 2, "eps " + num(eps) + " error bar shrink " + num(shrink) + "x");
  }
  const double dt = seconds_since(t0);
  l.require(dt < 120, "time " + num(dt) + " s");
  return l;
}

Vec3 random_point(std::mt19937& rng, ModelDomain d, double radius) {
  std::uniform_real_distribution<double> U(-1, 1);
  while (true) {
    Vec3 x(U(rng), U(rng), U(rng));
    if (x.norm() > radius || x.norm() < 0.05) continue;
    if (d != ModelDomain::ball) x[0] = std::abs(x[0]);
    if (d == ModelDomain::quarter_ball) x[1] = std::abs(x[1]);
    return x;
  }
}

Line oracle_agreement() {
  Line l;
  const Vec3 probes[] = {Vec3(0.25, 0.25, 0.5), Vec3(0.3, 0.2, 0.1), Vec3(0.2, 0.4, -0.3), Vec3(0.5, 0.1, 0.2),
                         Vec3(0.1, 0.3, 0.6)};
  struct Case {
    const char* name;
    ScalarFunction u, d1, d2;
  };
  const Case cases[] = {
      {"x1^2-x3^2", [](const Vec3& x) { return x[0] * x[0] - x[2] * x[2]; }, [](const Vec3& x) { return 2 * x[0]; },
       [](const Vec3&) { return 0.0; }},
      {"x3", [](const Vec3& x) { return x[2]; }, [](const Vec3&) { return 0.0; }, [](const Vec3&) { return 0.0; }},
      {"x1x2", [](const Vec3& x) { return x[0] * x[1]; }, [](const Vec3& x) { return x[1]; },
       [](const Vec3& x) { return x[0]; }},
  };
  const QuadratureRule q;
  double worst = 0;
  for (ModelDomain d : {ModelDomain::half_ball, ModelDomain::quarter_ball})
    for (const Case& c : cases) {
      ModelProblem p;
      p.domain = d;
      p.f1 = c.d1;
      if (d == ModelDomain::quarter_ball) p.f2 = c.d2;
      p.f3 = c.u;
      for (const Vec3& x : probes) worst = std::max(worst, std::abs(solve_model(p, q, x).value - c.u(x)));
    }
  l.require(worst <= 1e-4, "max probe diff " + num(worst));

  std::mt19937 rng(20240611);
  double trace = 0, neumann = 0, symmetry = 0;
  for (ModelDomain d : {ModelDomain::ball, ModelDomain::half_ball, ModelDomain::quarter_ball}) {
    for (int i = 0; i < 100; ++i) {
      const Vec3 y = random_point(rng, d, 0.9);
      const Vec3 x = random_point(rng, d, 0.9);
      if ((x - y).norm() < 1e-3) continue;
      const double gxy = green_function(d, x, y), gyx = green_function(d, y, x);
      symmetry = std::max(symmetry, std::abs(gxy - gyx) / std::max(1.0, std::abs(gxy)));
      const Vec3 s = random_point(rng, d, 1.0).normalized();
      trace = std::max(trace, std::abs(green_function(d, s, y)));
      if (d != ModelDomain::ball) {
        const double h = 1e-5;
        for (int axis = 0; axis < (d == ModelDomain::quarter_ball ? 2 : 1); ++axis) {
          Vec3 f = x;
          f[axis] = 0;
          const Vec3 e = Vec3::Unit(axis);
          neumann = std::max(neumann, std::abs(green_function(d, f + h * e, y) - green_function(d, f - h * e, y)) / (2 * h));
        }
      }
    }
  }
  l.require(trace <= 1e-10, "sphere trace " + num(trace));
  l.require(neumann <= 1e-8, "flat-face normal derivative " + num(neumann));
  l.require(symmetry <= 1e-12, "symmetry " + num(symmetry));
  return l;
}

Line coarea() {
  Line l;
  const MetricField flat = metrics::euclidean();
  const CoareaReport e = coarea_scan(flat, solve_mixed_bvp(flat, Grid(17), tight()), 32);
  l.require(std::abs(e.discrepancy[0]) <= 1e-6, "flat " + num(e.discrepancy[0]));
  for (int n : {33, 65}) {
    const MetricField m = bump(0.1);
    const CoareaReport r = coarea_scan(m, solve_mixed_bvp(m, Grid(n), tight()), 32);
    const double bound = n == 33 ? 0.02 : 0.005;
    l.require(std::abs(r.discrepancy[0]) <= bound, "conformal n " + std::to_string(n) + ": " + num(r.discrepancy[0]));
  }
  return l;
}

Line gauss_bonnet() {
  Line l;
  const MetricField flat = metrics::euclidean();
  const HarmonicSolution fs = solve_mixed_bvp(flat, Grid(17), tight());
  const double flat_res = gauss_bonnet_check(flat, fs, extract_level_set(flat, fs, 0.5)).residual;
  l.require(flat_res <= 1e-6, "flat " + num(flat_res));
  for (const char* f : {"0.1*sin(pi*x1)*sin(pi*x2)", "0.1*x3*sin(pi*x1)"}) {
    const MetricField m = metrics::conformal(Expression::parse(f));
    const HarmonicSolution s = solve_mixed_bvp(m, Grid(65), tight());
    double worst = 0;
    for (double theta : {0.2, 0.35, 0.5, 0.65, 0.8})
      worst = std::max(worst, gauss_bonnet_check(m, s, extract_level_set(m, s, theta)).residual);
    l.require(worst <= 0.05 * 2 * kPi, std::string("conformal ") + f + ": " + num(worst));
  }
  return l;
}

Line bochner() {
  Line l;
  const MetricField m = bump(0.05);
  std::vector<double> e;
  for (int n : {17, 33, 65}) e.push_back(bochner_residual(solve_mixed_bvp(m, Grid(n), tight()), m).max_norm);
  for (std::size_t i = 1; i < e.size(); ++i) {
    const double order = std::log2(e[i - 1] / e[i]);
    l.require(order >= 1.5, "order " + num(order) + " (" + num(e[i - 1]) + " -> " + num(e[i]) + ")");
  }
  return l;
}

Line maximum_principle() {
  Line l;
  const std::vector<std::pair<std::string, MetricField>> suite = {
      {"euclidean", metrics::euclidean()},
      {"conformal 0.05", bump(0.05)},
      {"conformal 0.1", bump(0.1)},
      {"conformal 0.2", bump(0.2)},
      {"conformal x3-dependent", metrics::conformal(Expression::parse("0.2*x3*sin(pi*x1)*cos(pi*x2)"))},
      {"warped", metrics::warped(Expression::parse("1+0.2*x1"))},
      {"diagonal", metrics::diagonal(Expression::constant(1), Expression::constant(1), Expression::constant(4))},
  };
  int passed = 0;
  for (const auto& [name, m] : suite) {
    const MaxPrincipleReport r = max_principle_check(solve_mixed_bvp(m, Grid(33)));
    if (r.pass) ++passed;
    else l.require(false, name);
  }
  l.require(passed == int(suite.size()), std::to_string(passed) + "/" + std::to_string(suite.size()) + " metrics");

  HarmonicSolution s = solve_mixed_bvp(bump(0.1), Grid(17));
  s.u.at(s.grid.index(8, 8, 8)) += 0.3;
  const MaxPrincipleReport bad = max_principle_check(s);
  l.require(!bad.pass, "corrupted field rejected");
  return l;
}

Line convergence() {
  Line l;
  const std::vector<int> sizes{9, 17, 33, 65};
  const ConvergenceTable a = manufactured_solution_error(
      metrics::euclidean(), Expression::parse("sin(pi*x1)*cosh(pi*x3)/cosh(pi)"), sizes, tight());
  const ConvergenceTable b = manufactured_solution_error(metrics::conformal(Expression::parse("0.1*x3*sin(pi*x1)")),
                                                         Expression::parse("x3 + 0.2*sin(x1 + x2 + x3)"), sizes, tight());
  l.require(!a.exact && a.min_order >= 1.8, "flat harmonic min order " + num(a.min_order));
  l.require(!b.exact && b.min_order >= 1.8, "curved min order " + num(b.min_order));
  return l;
}

Line torus() {
  Line l;
  TorusBoundInput g;
  g.volume = 4 * kPi;
  g.width = 1;
  const double genus = *torus_bounds(g).genus_from_width;
  l.require(genus == 4.0, "genus bound " + num(genus));
  TorusBoundInput e;
  e.volume = 6 * kPi;
  e.euler = 2;
  e.bilipschitz = 1;
  const TorusBounds b = torus_bounds(e);
  const double lo = 6 * kPi / (3 * kPi * 2), hi = 3 * 6 * kPi / (2 * kPi * 2 * 1);
  l.require(std::abs(*b.entropy_lower - lo) <= 1e-12 && std::abs(*b.entropy_upper - hi) <= 1e-12,
            "entropy [" + num(*b.entropy_lower) + ", " + num(*b.entropy_upper) + "]");
  return l;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Line()>>> criteria = {
      {"flat cube equality case", flat_cube},
      {"inequality sign on conformal metrics", inequality_sign},
      {"model oracle agreement", oracle_agreement},
      {"coarea identity", coarea},
      {"Gauss-Bonnet closure", gauss_bonnet},
      {"Bochner residual order", bochner},
      {"maximum principle suite", maximum_principle},
      {"manufactured convergence order", convergence},
      {"torus bound arithmetic", torus},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Line l;
    try {
      l = criteria[i].second();
    } catch (const std::exception& e) {
      l.pass = false;
      l.detail = std::string("exception: ") + e.what();
    }
    if (!l.pass) ++failures;
    std::printf("criterion %zu %s: %s (%s) [%.1f s]\n", i + 1, l.pass ? "PASS" : "FAIL", criteria[i].first,
                l.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
