#include "hmap/inequality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "hmap/errors.hpp"

namespace hmap {

namespace {


// Neumaier summation keeps report totals independent of small reorderings.
struct Accumulator {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

double hessian_norm_sq(const Mat3& g_inv, const Mat3& H) { return (g_inv * H * g_inv * H).trace(); }

double sqrt_det(const Mat3& g) { return std::sqrt(std::max(0.0, g.determinant())); }

// Trapezoid integral of H|du| over one face.
double face_integral(const MetricField& metric, const HarmonicSolution& sol, Face face) {
  const Grid& grid = sol.grid;
  const int n = grid.n();
  const double h = grid.h();
  const int a = face_axis(face);
  const int fixed = face_side(face) < 0 ? 0 : n - 1;
  Accumulator acc;
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      int c[3];
      c[a] = fixed;
      c[(a + 1) % 3] = s;
      c[(a + 2) % 3] = t;
      const std::size_t p = grid.index(c[0], c[1], c[2]);
      const Vec3 x = grid.point(p);
      const FaceGeometry fg = face_geometry(metric.jet(x, 1), face, x);
      acc.add(grid.weight(s) * grid.weight(t) * h * h * fg.area_density * fg.mean_curvature * sol.grad_norm.at(p));
    }
  return acc.value();
}

}  // namespace

InequalityVariant parse_variant(const std::string& name) {
  if (name == "dirichlet") return InequalityVariant::dirichlet;
  if (name == "cube") return InequalityVariant::cube;
  throw DomainError("unknown inequality variant '" + name + "'");
}

const char* variant_name(InequalityVariant v) { return v == InequalityVariant::dirichlet ? "dirichlet" : "cube"; }

LevelFamily build_level_family(const MetricField& metric, const HarmonicSolution& solution, int samples,
                               bool gauss_bonnet) {
  if (samples < 1) throw DomainError("level family needs at least one sample");
  LevelFamily fam;
  for (int k = 0; k < samples; ++k) {
    const double theta = (k + 0.5) / samples;
    LevelSurface s = extract_level_set(metric, solution, theta);
    BoundaryGeometry bg = boundary_geometry(metric, solution, s);
    LevelRecord r;
    r.theta = theta;
    r.area = s.area;
    r.chi = s.chi;
    r.boundary_length = s.boundary_length;
    for (double gamma : bg.smooth_corner_angles) r.corner_angle_sum += gamma;
    r.geodesic_curvature = bg.total_geodesic_curvature;
    r.near_critical = s.near_critical;
    if (gauss_bonnet) r.gauss_bonnet_residual = gauss_bonnet_check(metric, solution, s).residual;
    fam.surfaces.push_back(std::move(s));
    fam.boundaries.push_back(std::move(bg));
    fam.records.push_back(r);
  }
  return fam;
}

void recompute_totals(InequalityReport& r) {
  r.lhs = r.hess_term + r.scalar_term + r.boundary_mean_term;
  r.rhs = r.variant == InequalityVariant::dirichlet ? r.euler_term : r.euler_term - r.corner_angle_term;
  r.slack = r.rhs - r.lhs;
}

InequalityReport compute_inequality_terms(const HarmonicSolution& sol, const MetricField& metric,
                                          const LevelFamily& family, InequalityVariant variant, double delta_reg) {
  if (family.records.empty()) throw DomainError("inequality terms need a nonempty level family");
  const Grid& grid = sol.grid;
  const int n = grid.n();
  const double h3 = grid.h() * grid.h() * grid.h();

  InequalityReport r;
  r.variant = variant;
  r.n = n;
  r.samples = int(family.records.size());
  r.delta_reg = delta_reg < 0 ? regularization_threshold(sol) : delta_reg;

  Accumulator hess, scalar, hess_excluded;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t p = grid.index(i, j, k);
        const Vec3 x = grid.point(p);
        const MetricJet jet = metric.jet(x, 2);
        const Mat3 g_inv = inverse_metric(jet.g);
        const double w = grid.weight(i) * grid.weight(j) * grid.weight(k) * h3 * sqrt_det(jet.g);
        const double du = sol.grad_norm.at(p);
        const double hs = hessian_norm_sq(g_inv, unpack_symmetric(sol.hessian, p));
        hess.add(w * 0.5 * hs / std::max(du, r.delta_reg));
        if (du < r.delta_reg) hess_excluded.add(w * 0.5 * hs / r.delta_reg);
        scalar.add(w * 0.5 * (g_inv.cwiseProduct(ricci(jet))).sum() * du);

        // Lower-order coefficient b^k = −g^{ij} Γ^k_ij of the non-divergence form.
        const Christoffel G = christoffel(jet, g_inv);
        Vec3 b;
        for (int m = 0; m < 3; ++m) b[m] = -(g_inv.cwiseProduct(G[std::size_t(m)])).sum();
        r.lower_order_bound = std::max(r.lower_order_bound, b.norm());
      }
  r.hess_term = hess.value();
  r.scalar_term = scalar.value();

  Accumulator tb, side;
  tb.add(face_integral(metric, sol, Face::B));
  tb.add(face_integral(metric, sol, Face::T));
  for (Face f : kSideFaces) side.add(face_integral(metric, sol, f));
  r.boundary_topbottom_term = tb.value();
  r.boundary_side_term = side.value();
  r.boundary_mean_term = r.boundary_topbottom_term + r.boundary_side_term;

  const double dtheta = 1.0 / r.samples;
  Accumulator chi, corners, turning, kappa, flagged_area;
  for (const LevelRecord& l : family.records) {
    chi.add(2 * kPi * l.chi * dtheta);
    corners.add(l.corner_angle_sum * dtheta);
    kappa.add(l.geodesic_curvature * dtheta);
    if (l.near_critical) flagged_area.add(l.area * dtheta);
  }
  for (const BoundaryGeometry& bg : family.boundaries)
    for (double gamma : bg.smooth_corner_angles) turning.add((0.5 * kPi - gamma) * dtheta);
  r.euler_term = chi.value();
  r.corner_angle_term = corners.value();
  r.turning_term = turning.value();
  r.side_kappa_term = kappa.value();
  r.excluded_mass = r.lower_order_bound * flagged_area.value() + hess_excluded.value();
  r.levels = family.records;
  recompute_totals(r);
  return r;
}

double discretization_error(const InequalityReport& fine, const InequalityReport& coarse) {
  return std::abs(fine.hess_term - coarse.hess_term) + std::abs(fine.scalar_term - coarse.scalar_term) +
         std::abs(fine.boundary_mean_term - coarse.boundary_mean_term) +
         std::abs(fine.euler_term - coarse.euler_term) +
         std::abs(fine.corner_angle_term - coarse.corner_angle_term);
}

InequalityReport inequality_study(const MetricField& metric, int n, InequalityVariant variant, int samples,
                                  const SolverConfig& config, double delta_reg) {
  const Grid grid(n);
  const HarmonicSolution sol = solve_mixed_bvp(metric, grid, config);
  InequalityReport fine =
      compute_inequality_terms(sol, metric, build_level_family(metric, sol, samples), variant, delta_reg);
  const int nc = (n + 1) / 2;
  if (nc >= 9 && nc % 2 == 1) {
    const HarmonicSolution coarse_sol = solve_mixed_bvp(metric, Grid(nc), config);
    const InequalityReport coarse = compute_inequality_terms(
        coarse_sol, metric, build_level_family(metric, coarse_sol, samples), variant, delta_reg);
    fine.error_estimate = discretization_error(fine, coarse);
  }
  return fine;
}

VerifyResult verify_inequality(const InequalityReport& r, double tol) {
  VerifyResult v;
  const double err = r.error_estimate.value_or(0.0);
  const double terms[] = {r.hess_term, r.scalar_term, r.boundary_mean_term, r.euler_term,
                          r.turning_term, r.excluded_mass, r.lhs, r.rhs};
  for (double t : terms)
    if (!std::isfinite(t)) return v;
  // hess_term and excluded_mass are nonnegative by construction.
  if (r.hess_term < 0 || r.excluded_mass < 0) {
    v.margin = std::min(r.hess_term, r.excluded_mass);
    return v;
  }
  v.margin = r.slack + tol + err + r.excluded_mass;
  if (r.variant == InequalityVariant::cube) {
    v.margin = std::min(v.margin, r.turning_term - r.rhs + tol + err);
    v.margin = std::min(v.margin, tol + err - r.turning_term);
  }
  v.pass = v.margin >= 0;
  return v;
}

BochnerResult bochner_residual(const HarmonicSolution& sol, const MetricField& metric) {
  const Grid& grid = sol.grid;
  const int n = grid.n();
  const double h = grid.h();

  std::vector<double> w(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) w[p] = 0.5 * sol.grad_norm.at(p) * sol.grad_norm.at(p);
  const std::size_t stride[3] = {1, std::size_t(n), std::size_t(n) * n};
  // Fourth-order central stencils reach 2h. Nodes on ∂Q carry one-sided du whose error
  // constant differs from the central one, so they stay outside every stencil.
  const auto d1 = [&](std::size_t p, int a) {
    const std::size_t s = stride[a];
    return (-w[p + 2 * s] + 8 * w[p + s] - 8 * w[p - s] + w[p - 2 * s]) / (12 * h);
  };
  const auto d2 = [&](std::size_t p, int a) {
    const std::size_t s = stride[a];
    return (-w[p + 2 * s] + 16 * w[p + s] - 30 * w[p] + 16 * w[p - s] - w[p - 2 * s]) / (12 * h * h);
  };
  const auto d11 = [&](std::size_t p, int a, int b) {
    const std::size_t s = stride[b];
    return (-d1(p + 2 * s, a) + 8 * d1(p + s, a) - 8 * d1(p - s, a) + d1(p - 2 * s, a)) / (12 * h);
  };

  BochnerResult out;
  out.residual = GridField("bochner_residual", grid, 1);
  for (int k = 3; k < n - 3; ++k)
    for (int j = 3; j < n - 3; ++j)
      for (int i = 3; i < n - 3; ++i) {
        const std::size_t p = grid.index(i, j, k);
        const MetricJet jet = metric.jet(grid.point(p), 2);
        const Mat3 g_inv = inverse_metric(jet.g);
        const Christoffel G = christoffel(jet, g_inv);
        Mat3 ddw;
        for (int a = 0; a < 3; ++a) {
          ddw(a, a) = d2(p, a);
          for (int b = a + 1; b < 3; ++b) ddw(a, b) = ddw(b, a) = 0.5 * (d11(p, a, b) + d11(p, b, a));
        }
        const Vec3 dw(d1(p, 0), d1(p, 1), d1(p, 2));
        for (int m = 0; m < 3; ++m) ddw -= dw[m] * G[std::size_t(m)];
        const double lap = (g_inv.cwiseProduct(ddw)).sum();

        const Vec3 grad = g_inv * Vec3(sol.du.at(p, 0), sol.du.at(p, 1), sol.du.at(p, 2));
        const double res = lap - hessian_norm_sq(g_inv, unpack_symmetric(sol.hessian, p)) - grad.dot(ricci(jet) * grad);
        out.residual.at(p) = res;
        ++out.evaluated_nodes;
        if (std::abs(res) > out.max_norm) {
          out.max_norm = std::abs(res);
          out.max_node = p;
        }
      }
  return out;
}

namespace {

// Level-preserving gradient field grad u / |grad u|², so that du(X) = 1.
Vec3 level_flow(const MetricField& metric, const HarmonicSolution& sol, const Vec3& x) {
  const Vec3 du = sample_vector(sol.du, x);
  const Vec3 grad = inverse_metric(metric(x)) * du;
  const double sq = du.dot(grad);
  if (!(sq > 0)) throw DomainError("gradient flow reached a critical point");
  Vec3 X = grad / sq;
  for (int a = 0; a < 2; ++a)
    if (x[a] <= 1e-12 || x[a] >= 1 - 1e-12) X[a] = 0.0;
  return X;
}

Vec3 keep_inside(const Vec3& x, double slack) {
  for (int a = 0; a < 3; ++a)
    if (x[a] < -slack || x[a] > 1 + slack) {
      std::ostringstream msg;
      msg << "gradient flow left the cube at (" << x[0] << ", " << x[1] << ", " << x[2] << ")";
      throw DomainError(msg.str());
    }
  return x.cwiseMax(0.0).cwiseMin(1.0);
}

double edge_length(const MetricField& metric, const Vec3& a, const Vec3& b) {
  const Vec3 e = b - a;
  return std::sqrt(std::max(0.0, e.dot(metric(0.5 * (a + b)) * e)));
}

}  // namespace

RigidityDiagnostics rigidity_diagnostics(const HarmonicSolution& sol, const MetricField& metric,
                                         const LevelFamily& family) {
  if (family.surfaces.size() < 2) throw DomainError("rigidity diagnostics need at least two levels");
  const Grid& grid = sol.grid;
  const int n = grid.n();
  RigidityDiagnostics d;

  for (std::size_t p = 0; p < grid.size(); ++p) {
    const Vec3 x = grid.point(p);
    const MetricJet jet = metric.jet(x, 2);
    const Mat3 g_inv = inverse_metric(jet.g);
    d.max_hessian = std::max(d.max_hessian, std::sqrt(std::max(0.0, hessian_norm_sq(g_inv, unpack_symmetric(sol.hessian, p)))));
    d.max_scalar_curvature = std::max(d.max_scalar_curvature, std::abs((g_inv.cwiseProduct(ricci(jet))).sum()));
    const NodeClass nc = grid.classify(p);
    for (Face f : kAllFaces)
      if (nc.on(f)) d.max_mean_curvature = std::max(d.max_mean_curvature, std::abs(face_geometry(jet, f, x).mean_curvature));
  }
  for (const BoundaryGeometry& bg : family.boundaries)
    for (double gamma : bg.smooth_corner_angles)
      d.max_angle_deviation = std::max(d.max_angle_deviation, std::abs(gamma - 0.5 * kPi));

  const auto closest = [&](double target) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < family.records.size(); ++k)
      if (std::abs(family.records[k].theta - target) < std::abs(family.records[best].theta - target)) best = k;
    return best;
  };
  const std::size_t from = closest(0.25), to = closest(0.75);
  if (from == to) throw DomainError("rigidity diagnostics need two distinct levels");
  const LevelSurface& s = family.surfaces[from];
  d.theta_from = family.records[from].theta;
  d.theta_to = family.records[to].theta;

  const double span = d.theta_to - d.theta_from;
  const int steps = std::max(1, int(std::ceil(std::abs(span) / (0.5 * grid.h()))));
  const double dt = span / steps;
  // Tangency at the side faces holds up to the O(h²) error of du, so only a
  // larger overshoot counts as leaving Q.
  const double slack = 0.1 * grid.h() * grid.h();
  std::vector<Vec3> moved(s.vertices.size());
  for (std::size_t v = 0; v < s.vertices.size(); ++v) {
    Vec3 x = s.vertices[v];
    for (int st = 0; st < steps; ++st) {
      const Vec3 k1 = level_flow(metric, sol, x);
      const Vec3 k2 = level_flow(metric, sol, keep_inside(x + 0.5 * dt * k1, slack));
      const Vec3 k3 = level_flow(metric, sol, keep_inside(x + 0.5 * dt * k2, slack));
      const Vec3 k4 = level_flow(metric, sol, keep_inside(x + dt * k3, slack));
      x = keep_inside(x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), slack);
    }
    moved[v] = x;
  }

  const double floor_length = 0.25 * grid.h();
  std::map<std::pair<int, int>, bool> seen;
  for (const auto& t : s.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = std::min(t[e], t[(e + 1) % 3]), b = std::max(t[e], t[(e + 1) % 3]);
      if (!seen.emplace(std::make_pair(a, b), true).second) continue;
      const double l0 = edge_length(metric, s.vertices[std::size_t(a)], s.vertices[std::size_t(b)]);
      const double l1 = edge_length(metric, moved[std::size_t(a)], moved[std::size_t(b)]);
      d.flow_isometry_defect = std::max(d.flow_isometry_defect, std::abs(l1 - l0) / std::max(l0, floor_length));
    }
  (void)n;
  return d;
}

TorusBounds torus_bounds(const TorusBoundInput& in) {
  const auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v > 0)) throw DomainError(std::string(name) + " must be positive");
  };
  positive(in.volume, "volume");
  positive(in.width, "width");
  positive(in.translation_length, "translation_length");
  positive(in.constant_c, "constant_c");
  positive(in.euler, "euler");
  positive(in.bilipschitz, "bilipschitz");

  TorusBounds b;
  if (!in.volume) return b;
  const double vol = *in.volume;
  if (in.width) b.genus_from_width = 3 * vol / (4 * kPi * *in.width) + 1;
  if (in.constant_c && in.translation_length)
    b.genus_from_translation = 3 * vol / (4 * kPi * *in.constant_c * *in.translation_length) + 1;
  if (in.euler) {
    b.entropy_lower = vol / (3 * kPi * *in.euler);
    if (in.bilipschitz) b.entropy_upper = 3 * vol / (2 * kPi * *in.euler * *in.bilipschitz);
  }
  return b;
}

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

}  // namespace

std::string report_text(const InequalityReport& r, const VerifyResult& v) {
  std::ostringstream os;
  const auto line = [&](const char* key, double value) { os << key << " = " << fmt(value) << "\n"; };
  os << "variant = " << variant_name(r.variant) << "\n";
  os << "n = " << r.n << "\n";
  os << "theta_samples = " << r.samples << "\n";
  line("delta_reg", r.delta_reg);
  os << "\n[left side]\n";
  line("hess_term", r.hess_term);
  line("scalar_term", r.scalar_term);
  line("boundary_mean_term", r.boundary_mean_term);
  line("boundary_topbottom_term", r.boundary_topbottom_term);
  line("boundary_side_term", r.boundary_side_term);
  line("lhs", r.lhs);
  os << "\n[right side]\n";
  line("euler_term", r.euler_term);
  line("corner_angle_term", r.corner_angle_term);
  line("turning_term", r.turning_term);
  line("rhs", r.rhs);
  os << "\n[side grouping]\n";
  line("side_kappa_term", r.side_kappa_term);
  line("side_kappa_minus_mean", r.side_kappa_term - r.boundary_side_term);
  line("lhs_without_side", r.lhs - r.boundary_side_term);
  os << "\n[verdict]\n";
  line("lower_order_bound", r.lower_order_bound);
  line("excluded_mass", r.excluded_mass);
  line("slack", r.slack);
  if (r.error_estimate)
    line("error_estimate", *r.error_estimate);
  else
    os << "error_estimate = unavailable\n";
  line("margin", v.margin);
  os << "result = " << (v.pass ? "pass" : "fail") << "\n";
  return os.str();
}

nlohmann::json report_json(const InequalityReport& r, const VerifyResult& v) {
  nlohmann::json j;
  j["variant"] = variant_name(r.variant);
  j["n"] = r.n;
  j["theta_samples"] = r.samples;
  j["delta_reg"] = r.delta_reg;
  j["hess_term"] = r.hess_term;
  j["scalar_term"] = r.scalar_term;
  j["boundary_mean_term"] = r.boundary_mean_term;
  j["boundary_topbottom_term"] = r.boundary_topbottom_term;
  j["boundary_side_term"] = r.boundary_side_term;
  j["side_kappa_term"] = r.side_kappa_term;
  j["euler_term"] = r.euler_term;
  j["corner_angle_term"] = r.corner_angle_term;
  j["turning_term"] = r.turning_term;
  j["lower_order_bound"] = r.lower_order_bound;
  j["excluded_mass"] = r.excluded_mass;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack;
  j["error_estimate"] = r.error_estimate ? nlohmann::json(*r.error_estimate) : nlohmann::json(nullptr);
  j["margin"] = v.margin;
  j["pass"] = v.pass;
  return j;
}

nlohmann::json diagnostics_json(const RigidityDiagnostics& d) {
  return {{"max_hessian", d.max_hessian},
          {"max_scalar_curvature", d.max_scalar_curvature},
          {"max_mean_curvature", d.max_mean_curvature},
          {"max_angle_deviation", d.max_angle_deviation},
          {"flow_isometry_defect", d.flow_isometry_defect},
          {"theta_from", d.theta_from},
          {"theta_to", d.theta_to}};
}

nlohmann::json bounds_json(const TorusBounds& b) {
  nlohmann::json j = nlohmann::json::object();
  const auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("genus_from_width", b.genus_from_width);
  put("genus_from_translation", b.genus_from_translation);
  put("entropy_lower", b.entropy_lower);
  put("entropy_upper", b.entropy_upper);
  return j;
}

}  // namespace hmap
