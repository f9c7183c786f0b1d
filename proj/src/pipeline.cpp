#include "hmap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "hmap/errors.hpp"
#include "hmap/field_io.hpp"
#include "hmap/level_set.hpp"

namespace fs = std::filesystem;

namespace hmap {

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

namespace {

std::string short_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

class Staging {
 public:
  explicit Staging(std::string out_dir) : out_(std::move(out_dir)) {
    if (out_.empty()) throw DomainError("no output directory");
    while (out_.size() > 1 && out_.back() == '/') out_.pop_back();
    dir_ = out_ + ".partial";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  std::string path(const std::string& name) {
    names_.push_back(name);
    const fs::path p = fs::path(dir_) / name;
    fs::create_directories(p.parent_path());
    return p.string();
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(path(name), std::ios::binary);
    f << content;
    if (!f) throw DomainError("cannot write " + name);
  }

  std::vector<std::string> commit() {
    fs::create_directories(out_);
    for (const std::string& name : names_) {
      const fs::path target = fs::path(out_) / name;
      fs::create_directories(target.parent_path());
      fs::remove(target);
      fs::rename(fs::path(dir_) / name, target);
    }
    return names_;
  }

 private:
  std::string out_;
  std::string dir_;
  std::vector<std::string> names_;
};

HarmonicSolution solve(const RunConfig& c, const MetricField& m, int n) {
  const Grid grid(n);
  if (c.continuation_steps > 0) return continuation_solve(m, grid, c.continuation_steps, c.solver);
  return solve_mixed_bvp(m, grid, c.solver);
}

std::string levels_csv(const LevelFamily& fam) {
  std::ostringstream os;
  os << "theta,area,chi,boundary_length,corner_angle_sum,geodesic_curvature,gb_residual,near_critical\n";
  for (const LevelRecord& r : fam.records) {
    os << format_number(r.theta) << ',' << format_number(r.area) << ',' << r.chi << ','
       << format_number(r.boundary_length) << ',' << format_number(r.corner_angle_sum) << ','
       << format_number(r.geodesic_curvature) << ','
       << (r.gauss_bonnet_residual ? format_number(*r.gauss_bonnet_residual) : std::string()) << ','
       << (r.near_critical ? 1 : 0) << '\n';
  }
  return os.str();
}

void write_plots(Staging& st, const LevelFamily& fam) {
  PlotSeries area{"level area", "theta", "area", {}, {}};
  PlotSeries chi{"Euler characteristic", "theta", "chi", {}, {}};
  PlotSeries gb{"Gauss-Bonnet residual", "theta", "residual", {}, {}};
  for (const LevelRecord& r : fam.records) {
    area.x.push_back(r.theta);
    area.y.push_back(r.area);
    chi.x.push_back(r.theta);
    chi.y.push_back(r.chi);
    if (r.gauss_bonnet_residual) {
      gb.x.push_back(r.theta);
      gb.y.push_back(*r.gauss_bonnet_residual);
    }
  }
  st.write("area.svg", svg_line_plot(area));
  st.write("chi.svg", svg_line_plot(chi));
  if (!gb.x.empty()) st.write("gauss_bonnet.svg", svg_line_plot(gb));
}

int run_solve(const RunConfig& c, const MetricField& m, Staging& st, std::ostream& log) {
  const HarmonicSolution sol = solve(c, m, c.n);
  write_container(st.path("solution.hmg"), solution_container(sol));
  write_csv_slice(st.path("slice_u.csv"), sol.grid, sol.u, 1, (c.n - 1) / 2);
  const MaxPrincipleReport mp = max_principle_check(sol);
  nlohmann::json j;
  j["metric"] = sol.metric_description;
  j["n"] = c.n;
  j["iterations"] = sol.iterations;
  j["residual"] = sol.residual;
  j["clamped_nodes"] = sol.clamped_nodes;
  j["step_iterations"] = sol.step_iterations;
  j["min_u"] = mp.min_u;
  j["max_u"] = mp.max_u;
  j["max_principle"] = mp.pass;
  st.write("summary.json", j.dump(2) + "\n");
  log << "solved n = " << c.n << " in " << sol.iterations << " iterations, residual " << sol.residual << "\n";
  log << "maximum principle: " << (mp.pass ? "pass" : "fail") << "\n";
  return mp.pass ? kExitPass : kExitCheckFailed;
}

int run_verify(const RunConfig& c, const MetricField& m, Staging& st, std::ostream& log) {
  const HarmonicSolution sol = solve(c, m, c.n);
  write_container(st.path("solution.hmg"), solution_container(sol));
  const LevelFamily fam = build_level_family(m, sol, c.theta_samples, true);

  std::optional<HarmonicSolution> coarse;
  std::optional<LevelFamily> coarse_fam;
  const int nc = (c.n + 1) / 2;
  if (c.error_estimate && nc >= 9 && nc % 2 == 1) {
    coarse = solve(c, m, nc);
    coarse_fam = build_level_family(m, *coarse, c.theta_samples);
  }

  const RigidityDiagnostics diag = rigidity_diagnostics(sol, m, fam);
  const BochnerResult bochner = bochner_residual(sol, m);

  nlohmann::json runs = nlohmann::json::array();
  std::string text;
  bool all_pass = true;
  for (InequalityVariant v : c.variants) {
    InequalityReport rep = compute_inequality_terms(sol, m, fam, v, c.delta_reg);
    if (coarse)
      rep.error_estimate =
          discretization_error(rep, compute_inequality_terms(*coarse, m, *coarse_fam, v, c.delta_reg));
    const VerifyResult verdict = verify_inequality(rep, c.tolerance);
    all_pass = all_pass && verdict.pass;
    nlohmann::json j = report_json(rep, verdict);
    j["metric"] = sol.metric_description;
    runs.push_back(j);
    text += "[[" + std::string(variant_name(v)) + "]]\n" + report_text(rep, verdict) + "\n";
    log << variant_name(v) << ": slack " << rep.slack << ", error estimate "
        << (rep.error_estimate ? short_number(*rep.error_estimate) : "unavailable") << ", "
        << (verdict.pass ? "pass" : "fail") << "\n";
  }
  text += "[[diagnostics]]\n";
  const nlohmann::json diag_json = diagnostics_json(diag);
  for (const auto& [key, value] : diag_json.items()) text += key + " = " + format_number(value) + "\n";
  text += "bochner_max_residual = " + format_number(bochner.max_norm) + "\n";

  nlohmann::json report;
  report["runs"] = runs;
  report["diagnostics"] = diag_json;
  report["bochner_max_residual"] = bochner.max_norm;
  st.write("report.txt", text);
  st.write("report.json", report.dump(2) + "\n");
  st.write("levels.csv", levels_csv(fam));
  if (c.plots) write_plots(st, fam);
  if (c.meshes)
    for (std::size_t k = 0; k < fam.surfaces.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "levels/level_%03zu.off", k);
      write_off(st.path(name), fam.surfaces[k]);
    }
  return all_pass ? kExitPass : kExitCheckFailed;
}

struct ManufacturedCase {
  std::function<double(const Vec3&)> u, d1, d2;
};

ManufacturedCase manufactured_case(const std::string& name) {
  if (name == "quadratic")
    return {[](const Vec3& x) { return x[0] * x[0] - x[2] * x[2]; }, [](const Vec3& x) { return 2 * x[0]; },
            [](const Vec3&) { return 0.0; }};
  if (name == "linear")
    return {[](const Vec3& x) { return x[2]; }, [](const Vec3&) { return 0.0; }, [](const Vec3&) { return 0.0; }};
  return {[](const Vec3& x) { return x[0] * x[1]; }, [](const Vec3& x) { return x[1]; },
          [](const Vec3& x) { return x[0]; }};
}

int run_oracle(const RunConfig& c, Staging& st, std::ostream& log) {
  static const Vec3 probes[] = {Vec3(0.25, 0.25, 0.5), Vec3(0.3, 0.2, 0.1), Vec3(0.2, 0.4, -0.3),
                               Vec3(0.5, 0.1, 0.2), Vec3(0.1, 0.3, 0.6)};
  QuadratureRule q;
  q.points = c.quadrature_points;
  std::ostringstream summary;
  summary << "case,domain,max_abs_diff,max_quad_error,pass\n";
  bool all_pass = true;
  for (const std::string& name : c.oracle_cases) {
    const ManufacturedCase mc = manufactured_case(name);
    ModelProblem p;
    p.domain = c.oracle_domain;
    p.f1 = mc.d1;
    if (c.oracle_domain == ModelDomain::quarter_ball) p.f2 = mc.d2;
    p.f3 = mc.u;
    std::vector<ProbeRow> rows;
    double worst = 0, worst_quad = 0;
    for (const Vec3& x : probes) {
      const OracleValue v = solve_model(p, q, x);
      ProbeRow r{x, v.value, mc.u(x), std::abs(v.value - mc.u(x)), v.error_estimate};
      worst = std::max(worst, r.abs_diff);
      worst_quad = std::max(worst_quad, r.quad_error);
      rows.push_back(r);
    }
    write_probe_csv(st.path("oracle_" + name + ".csv"), rows);
    const bool pass = worst <= c.probe_tolerance;
    all_pass = all_pass && pass;
    summary << name << ',' << model_domain_name(c.oracle_domain) << ',' << format_number(worst) << ','
            << format_number(worst_quad) << ',' << (pass ? 1 : 0) << '\n';
    log << "oracle " << name << " on " << model_domain_name(c.oracle_domain) << ": max probe diff " << worst
        << (pass ? " (pass)" : " (fail)") << "\n";
  }
  st.write("oracle_summary.csv", summary.str());
  return all_pass ? kExitPass : kExitCheckFailed;
}

int run_converge(const RunConfig& c, const MetricField& m, Staging& st, std::ostream& log) {
  std::ostringstream os;
  if (c.converge_quantity == "manufactured") {
    const ConvergenceTable t = manufactured_solution_error(m, Expression::parse(c.exact_solution), c.sizes, c.solver);
    os << "n,max_error,order,flag\n";
    for (const ConvergenceRow& r : t.rows) {
      std::string flag;
      if (t.exact) flag = "exact";
      else if (r.order) flag = *r.order >= 1.8 ? "ok" : "low";
      os << r.n << ',' << format_number(r.max_error) << ',' << (r.order && !t.exact ? format_number(*r.order) : "") << ','
         << flag << '\n';
    }
    st.write("convergence.csv", os.str());
    std::string notes;
    for (const std::string& w : t.warnings) notes += w + "\n";
    st.write("convergence_warnings.txt", notes);
    if (t.exact)
      log << "manufactured solution reproduced exactly\n";
    else
      log << "minimum observed order " << t.min_order << "\n";
    return kExitPass;
  }

  os << "n,slack,error_estimate,shrink_ratio,flag\n";
  std::optional<double> prev;
  bool monotone = true;
  for (int n : c.sizes) {
    const InequalityReport r = inequality_study(m, n, c.variants.front(), c.theta_samples, c.solver, c.delta_reg);
    std::string ratio, flag;
    if (prev && r.error_estimate) {
      const double q = *prev / *r.error_estimate;
      ratio = format_number(q);
      flag = q >= 2 ? "shrinking" : "stalled";
      monotone = monotone && q > 1;
    }
    os << n << ',' << format_number(r.slack) << ','
       << (r.error_estimate ? format_number(*r.error_estimate) : "") << ',' << ratio << ',' << flag << '\n';
    prev = r.error_estimate;
    log << "n = " << n << ": slack " << r.slack << "\n";
  }
  st.write("slack_convergence.csv", os.str());
  log << "error bars " << (monotone ? "shrink monotonically" : "do not shrink monotonically") << "\n";
  return kExitPass;
}

int run_bounds(const RunConfig& c, Staging& st, std::ostream& log) {
  const TorusBounds b = torus_bounds(c.bounds);
  std::ostringstream os;
  const auto line = [&](const char* label, const std::optional<double>& v) {
    if (!v) return;
    os << label << " = " << short_number(*v) << "\n";
    log << label << ": " << short_number(*v) << "\n";
  };
  line("genus_bound_width", b.genus_from_width);
  line("genus_bound_translation", b.genus_from_translation);
  line("entropy_lower", b.entropy_lower);
  line("entropy_upper", b.entropy_upper);
  st.write("bounds.txt", os.str());
  st.write("bounds.json", bounds_json(b).dump(2) + "\n");
  return kExitPass;
}

}  // namespace

std::string svg_line_plot(const PlotSeries& s) {
  const double W = 640, H = 400, left = 70, right = 20, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!s.x.empty()) {
    x0 = *std::min_element(s.x.begin(), s.x.end());
    x1 = *std::max_element(s.x.begin(), s.x.end());
    y0 = *std::min_element(s.y.begin(), s.y.end());
    y1 = *std::max_element(s.y.begin(), s.y.end());
  }
  if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 <= 1e-12 * std::max(1.0, std::abs(y0))) {
    const double pad = std::max(1e-12, 0.1 * std::abs(y0));
    y0 -= pad;
    y1 += pad;
  }
  const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  const auto py = [&](double y) { return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom); };
  char buf[256];
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  os << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">%s</text>\n",
                svg_escape(s.title).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                left, H - bottom, W - right, H - bottom, left, top, left, H - bottom);
  os << buf;
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"11\">%.4g</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" font-size=\"11\">%.4g</text>\n",
                  px(xv), H - bottom + 16, xv, left - 6, py(yv) + 4, yv);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"13\">%s</text>\n",
                0.5 * (left + W - right), H - 12, svg_escape(s.x_label).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 %.1f)\">%s</text>\n",
                0.5 * (top + H - bottom), 0.5 * (top + H - bottom), svg_escape(s.y_label).c_str());
  os << buf;
  os << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(s.x[i]), py(s.y[i]));
    os << buf;
  }
  os << "\"/>\n</svg>\n";
  return os.str();
}

RunOutcome run_pipeline(const RunConfig& c, const std::string& out_dir, std::ostream& log) {
  Staging st(out_dir);
  RunOutcome out;
  switch (c.command) {
    case Command::solve: out.exit_code = run_solve(c, build_metric(c.metric), st, log); break;
    case Command::verify: out.exit_code = run_verify(c, build_metric(c.metric), st, log); break;
    case Command::oracle: out.exit_code = run_oracle(c, st, log); break;
    case Command::converge: out.exit_code = run_converge(c, build_metric(c.metric), st, log); break;
    case Command::bounds: out.exit_code = run_bounds(c, st, log); break;
  }
  out.artifacts = st.commit();
  return out;
}

}  // namespace hmap
