#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hmap/config.hpp"
#include "hmap/errors.hpp"
#include "hmap/pipeline.hpp"

using namespace hmap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hmap_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig config_from(const std::string& text) { return load_run_config(ConfigDocument::parse(text)); }

}  // namespace

TEST_CASE("config parsing") {
  const ConfigDocument doc = ConfigDocument::parse(
      "# leading comment\n"
      "[run]\n"
      "command = solve   ; trailing comment\n"
      "\n"
      "[grid]\n"
      "n = 17\n");
  REQUIRE(doc.find("run.command"));
  CHECK(doc.find("run.command")->value == "solve");
  CHECK(doc.find("grid.n")->line == 6);

  const RunConfig c = load_run_config(doc);
  CHECK(c.command == Command::solve);
  CHECK(c.n == 17);
  CHECK(c.theta_samples == 32);
  CHECK(c.solver.tolerance == 1e-10);
  CHECK(c.sizes == std::vector<int>{9, 17, 33, 65});
}

TEST_CASE("config errors carry line and key") {
  try {
    config_from("[grid]\nn = 17\nresolution = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(e.key() == "grid.resolution");
  }
  try {
    config_from("[grid]\nn = 16\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
    CHECK(e.key() == "grid.n");
  }
  try {
    config_from("[solver]\ntolerance = small\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "solver.tolerance");
  }
  try {
    config_from("[metric]\nname = conformal\nf = sin(pi*x1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(e.key() == "metric.f");
  }
  CHECK_THROWS_AS(config_from("n = 3\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[grid\nn = 9\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[grid]\nn 9\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[metric]\nname = conformal\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[run]\ncommand = fly\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[run]\ncommand = converge\n[grid]\nsizes = 9,17\n[converge]\nexact = x3\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[run]\ncommand = bounds\n"), ConfigError);
}

TEST_CASE("overrides replace file values") {
  ConfigDocument doc = ConfigDocument::parse("[grid]\nn = 17\n");
  doc.apply_override("grid.n=33");
  doc.apply_override("levels.samples = 8");
  const RunConfig c = load_run_config(doc);
  CHECK(c.n == 33);
  CHECK(c.theta_samples == 8);
  CHECK(doc.find("grid.n")->line == 0);
  CHECK_THROWS_AS(doc.apply_override("n=3"), ConfigError);
  CHECK_THROWS_AS(doc.apply_override("grid.n"), ConfigError);
}

TEST_CASE("metric specifications") {
  MetricSpec inline_form;
  inline_form.name = "diagonal(1, 1, 4)";
  const Mat3 g = build_metric(inline_form)(Vec3(0.3, 0.3, 0.3));
  CHECK(g(2, 2) == 4.0);
  CHECK(g(0, 1) == 0.0);

  const RunConfig c = config_from("[metric]\nname = conformal\nf = 0.1*x1\nderivatives = finite_difference\n");
  CHECK(c.metric.finite_differences);
  const MetricField m = build_metric(c.metric);
  CHECK(m(Vec3(0.5, 0.5, 0.5))(0, 0) == doctest::Approx(std::exp(0.1)));

  MetricSpec bad;
  bad.name = "sphere";
  CHECK_THROWS_AS(build_metric(bad), DomainError);
}

TEST_CASE("schema document lists every key") {
  const std::string md = schema_markdown();
  for (const KeySpec& k : config_schema()) CHECK(md.find(std::string("`") + k.key + "`") != std::string::npos);
}

TEST_CASE("verify run writes the artifact set and is deterministic") {
  const fs::path out = scratch("verify");
  RunConfig c = config_from("[grid]\nn = 17\n[levels]\nsamples = 8\nmeshes = true\n");
  std::ostringstream log;
  const RunOutcome first = run_pipeline(c, out.string(), log);
  CHECK(first.exit_code == kExitPass);
  for (const char* name : {"solution.hmg", "levels.csv", "report.txt", "report.json", "area.svg", "chi.svg",
                           "gauss_bonnet.svg", "levels/level_000.off"})
    CHECK(fs::exists(out / name));
  CHECK_FALSE(fs::exists(out.string() + ".partial"));

  const std::string csv = slurp(out / "levels.csv");
  CHECK(csv.rfind("theta,area,chi,boundary_length", 0) == 0);
  const std::string report = slurp(out / "report.txt");
  CHECK(report.find("result = pass") != std::string::npos);

  const std::string json = slurp(out / "report.json");
  run_pipeline(c, out.string(), log);
  CHECK(slurp(out / "levels.csv") == csv);
  CHECK(slurp(out / "report.json") == json);
  CHECK(slurp(out / "report.txt") == report);
  fs::remove_all(out);
}

TEST_CASE("solve run") {
  const fs::path out = scratch("solve");
  const RunConfig c = config_from("[run]\ncommand = solve\n[grid]\nn = 9\n[solver]\ncontinuation_steps = 2\n");
  std::ostringstream log;
  CHECK(run_pipeline(c, out.string(), log).exit_code == kExitPass);
  CHECK(fs::exists(out / "solution.hmg"));
  CHECK(slurp(out / "slice_u.csv").rfind("i,j,k,x1,x2,x3,u", 0) == 0);
  CHECK(slurp(out / "summary.json").find("\"max_principle\": true") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("failed solve leaves no artifacts") {
  const fs::path out = scratch("failed");
  const RunConfig c = config_from("[metric]\nname = conformal(0.1*sin(pi*x1)*cos(pi*x3))\n[grid]\nn = 17\n[solver]\nmax_iterations = 1\n");
  std::ostringstream log;
  CHECK_THROWS_AS(run_pipeline(c, out.string(), log), SolverError);
  CHECK_FALSE(fs::exists(out));
  CHECK_FALSE(fs::exists(out.string() + ".partial"));
}

TEST_CASE("oracle run and failing check") {
  const fs::path out = scratch("oracle");
  RunConfig c = config_from("[run]\ncommand = oracle\n[oracle]\ndomain = quarter_ball\n");
  std::ostringstream log;
  CHECK(run_pipeline(c, out.string(), log).exit_code == kExitPass);
  for (const char* name : {"oracle_quadratic.csv", "oracle_linear.csv", "oracle_product.csv", "oracle_summary.csv"})
    CHECK(fs::exists(out / name));
  CHECK(slurp(out / "oracle_linear.csv").rfind("x1,x2,x3,oracle,reference,abs_diff,quad_error", 0) == 0);

  c.probe_tolerance = -1.0;
  CHECK(run_pipeline(c, out.string(), log).exit_code == kExitCheckFailed);
  fs::remove_all(out);
}

TEST_CASE("converge runs") {
  const fs::path out = scratch("converge");
  std::ostringstream log;
  RunConfig exact = config_from("[run]\ncommand = converge\n[grid]\nsizes = 9,17,33\n[converge]\nexact = x3\n");
  run_pipeline(exact, out.string(), log);
  const std::string table = slurp(out / "convergence.csv");
  CHECK(table.find(",exact") != std::string::npos);

  RunConfig smooth = config_from(
      "[run]\ncommand = converge\n[grid]\nsizes = 9,17,33\n[converge]\nexact = sin(pi*x1)*cosh(pi*x3)/cosh(pi)\n");
  run_pipeline(smooth, out.string(), log);
  const std::string rows = slurp(out / "convergence.csv");
  CHECK(rows.find(",ok") != std::string::npos);
  CHECK(rows.find(",low") == std::string::npos);

  RunConfig slack = config_from(
      "[run]\ncommand = converge\n[metric]\nname = conformal(0.1*sin(pi*x1)*sin(pi*x2))\n[grid]\nsizes = 17,33,65\n"
      "[levels]\nsamples = 8\n[converge]\nquantity = slack\n");
  run_pipeline(slack, out.string(), log);
  const std::string s = slurp(out / "slack_convergence.csv");
  CHECK(s.rfind("n,slack,error_estimate,shrink_ratio,flag", 0) == 0);
  CHECK(s.find("stalled") == std::string::npos);
  CHECK(log.str().find("shrink monotonically") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("bounds run") {
  const fs::path out = scratch("bounds");
  RunConfig c = config_from("[run]\ncommand = bounds\n[bounds]\nvolume = 12.566370614359172\nwidth = 1\n");
  std::ostringstream log;
  CHECK(run_pipeline(c, out.string(), log).exit_code == kExitPass);
  CHECK(log.str().find("genus_bound_width: 4\n") != std::string::npos);
  CHECK(slurp(out / "bounds.txt") == "genus_bound_width = 4\n");
  c.bounds.width = -1.0;
  CHECK_THROWS_AS(run_pipeline(c, out.string(), log), DomainError);
  fs::remove_all(out);
}

TEST_CASE("svg plot") {
  const std::string svg = svg_line_plot({"t", "x", "y", {0, 0.5, 1}, {1, 1, 1}});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg == svg_line_plot({"t", "x", "y", {0, 0.5, 1}, {1, 1, 1}}));
}
