#include "hmap/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "hmap/errors.hpp"
#include "hmap/expression.hpp"

namespace hmap {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

const KeySpec* spec_for(const std::string& key) {
  for (const KeySpec& k : config_schema())
    if (key == k.key) return &k;
  return nullptr;
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return out = true, true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return out = false, true;
  return false;
}

bool parse_real(const std::string& v, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(v, &used);
    return used == v.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& v, long& out) {
  try {
    std::size_t used = 0;
    out = std::stol(v, &used);
    return used == v.size();
  } catch (const std::exception&) {
    return false;
  }
}

const char* type_name(ValueType t) {
  switch (t) {
    case ValueType::string: return "string";
    case ValueType::integer: return "integer";
    case ValueType::real: return "real";
    case ValueType::boolean: return "boolean";
    case ValueType::int_list: return "integer list";
    case ValueType::expression: return "expression";
  }
  return "?";
}

// Typed lookup with schema defaults.
class Reader {
 public:
  explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (const auto* e = doc_.find(key)) return e->value;
    const KeySpec* s = spec_for(key);
    if (s && s->fallback) return std::string(s->fallback);
    return std::nullopt;
  }
  int line(const std::string& key) const {
    const auto* e = doc_.find(key);
    return e ? e->line : 0;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(where(key) + what, line(key), key);
  }
  std::string where(const std::string& key) const {
    const int l = line(key);
    return (l > 0 ? "line " + std::to_string(l) + ": " : std::string()) + key + ": ";
  }

  std::string text(const std::string& key) const { return raw(key).value_or(""); }
  double real(const std::string& key) const {
    double v = 0;
    parse_real(text(key), v);
    return v;
  }
  std::optional<double> optional_real(const std::string& key) const {
    if (!raw(key)) return std::nullopt;
    return real(key);
  }
  int integer(const std::string& key) const {
    long v = 0;
    parse_int(text(key), v);
    return int(v);
  }
  bool boolean(const std::string& key) const {
    bool v = false;
    parse_bool(text(key), v);
    return v;
  }

 private:
  const ConfigDocument& doc_;
};

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::istringstream is(text);
  std::string raw_line, section;
  int line_no = 0;
  while (std::getline(is, raw_line)) {
    ++line_no;
    std::string line = raw_line;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header", line_no, line);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name", line_no, line);
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value", line_no, line);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing key", line_no, "");
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' outside any section", line_no, key);
    doc.set(section + "." + key, trim(line.substr(eq + 1)), line_no);
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path, 0, "");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ConfigDocument::apply_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  const std::string key = trim(assignment.substr(0, eq));
  if (eq == std::string::npos || key.find('.') == std::string::npos)
    throw ConfigError("override '" + assignment + "' must look like section.key=value", 0, key);
  set(key, trim(assignment.substr(eq + 1)), 0);
}

void ConfigDocument::set(const std::string& key, const std::string& value, int line) {
  entries_[key] = Entry{value, line};
}

const ConfigDocument::Entry* ConfigDocument::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = {
      {"run.command", ValueType::string, "verify", "solve | verify | oracle | converge | bounds"},
      {"run.output", ValueType::string, nullptr, "output directory (else --out, then HMAP_OUT_DIR, then ./hmap_out)"},
      {"metric.name", ValueType::string, "euclidean",
       "euclidean | conformal | warped | diagonal | custom, or inline e.g. conformal(0.1*sin(pi*x1))"},
      {"metric.f", ValueType::expression, nullptr, "conformal exponent f in g = exp(2f) δ"},
      {"metric.phi", ValueType::expression, nullptr, "warping factor in g = dx1² + dx2² + φ² dx3²"},
      {"metric.d1", ValueType::expression, nullptr, "diagonal entry g11"},
      {"metric.d2", ValueType::expression, nullptr, "diagonal entry g22"},
      {"metric.d3", ValueType::expression, nullptr, "diagonal entry g33"},
      {"metric.g11", ValueType::expression, nullptr, "custom entry"},
      {"metric.g12", ValueType::expression, nullptr, "custom entry"},
      {"metric.g13", ValueType::expression, nullptr, "custom entry"},
      {"metric.g22", ValueType::expression, nullptr, "custom entry"},
      {"metric.g23", ValueType::expression, nullptr, "custom entry"},
      {"metric.g33", ValueType::expression, nullptr, "custom entry"},
      {"metric.derivatives", ValueType::string, "analytic", "analytic | finite_difference"},
      {"metric.fd_step", ValueType::real, "1e-3", "step for finite-difference metric derivatives"},
      {"grid.n", ValueType::integer, "33", "nodes per axis (odd, >= 9)"},
      {"grid.sizes", ValueType::int_list, "9,17,33,65", "grid sequence for converge (>= 3 sizes)"},
      {"solver.method", ValueType::string, "cg", "cg | sor | direct"},
      {"solver.tolerance", ValueType::real, "1e-10", "relative residual tolerance"},
      {"solver.max_iterations", ValueType::integer, "20000", "iteration cap"},
      {"solver.sor_omega", ValueType::real, "0", "SOR relaxation, 0 picks 2/(1+sin(πh))"},
      {"solver.continuation_steps", ValueType::integer, "0", "0 solves directly, k > 0 uses k homotopy steps"},
      {"levels.samples", ValueType::integer, "32", "number of θ levels (midpoint rule)"},
      {"levels.delta_reg", ValueType::real, nullptr, "regularization of 1/|du| (default 1e-6 max|du|)"},
      {"levels.plots", ValueType::boolean, "true", "write SVG plots of θ-indexed quantities"},
      {"levels.meshes", ValueType::boolean, "false", "write OFF meshes of the levels"},
      {"inequality.variant", ValueType::string, "cube", "cube | dirichlet | both"},
      {"inequality.tolerance", ValueType::real, "1e-8", "tolerance added to the verify margin"},
      {"inequality.error_estimate", ValueType::boolean, "true", "estimate discretization error with a coarse solve"},
      {"oracle.domain", ValueType::string, "half_ball", "half_ball | quarter_ball"},
      {"oracle.cases", ValueType::string, "quadratic,linear,product",
       "manufactured solutions: quadratic (x1² − x3²), linear (x3), product (x1 x2)"},
      {"oracle.points", ValueType::integer, "32", "Gauss points per panel and axis"},
      {"oracle.tolerance", ValueType::real, "1e-4", "allowed probe deviation"},
      {"converge.exact", ValueType::expression, nullptr, "exact solution for the manufactured study"},
      {"converge.quantity", ValueType::string, "manufactured", "manufactured | slack"},
      {"bounds.volume", ValueType::real, nullptr, "hyperbolic volume of the mapping torus"},
      {"bounds.width", ValueType::real, nullptr, "fundamental domain width W"},
      {"bounds.translation_length", ValueType::real, nullptr, "translation length"},
      {"bounds.constant_c", ValueType::real, nullptr, "constant C of the translation-length bound"},
      {"bounds.euler", ValueType::real, nullptr, "|χ(S)| of the fibre"},
      {"bounds.bilipschitz", ValueType::real, nullptr, "bilipschitz constant K"},
  };
  return schema;
}

namespace {

std::string table_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string schema_markdown() {
  std::ostringstream os;
  os << "| key | type | default | meaning |\n|---|---|---|---|\n";
  for (const KeySpec& k : config_schema())
    os << "| `" << k.key << "` | " << type_name(k.type) << " | " << (k.fallback ? k.fallback : "") << " | "
       << table_cell(k.help) << " |\n";
  return os.str();
}

void validate_config(const ConfigDocument& doc) {
  for (const auto& [key, entry] : doc.entries()) {
    const std::string where = (entry.line > 0 ? "line " + std::to_string(entry.line) + ": " : std::string("override: "));
    const KeySpec* spec = spec_for(key);
    if (!spec) throw ConfigError(where + "unknown key '" + key + "'", entry.line, key);
    const std::string& v = entry.value;
    bool ok = true;
    switch (spec->type) {
      case ValueType::string: ok = !v.empty(); break;
      case ValueType::integer: {
        long i;
        ok = parse_int(v, i);
        break;
      }
      case ValueType::real: {
        double d;
        ok = parse_real(v, d);
        break;
      }
      case ValueType::boolean: {
        bool b;
        ok = parse_bool(v, b);
        break;
      }
      case ValueType::int_list:
        for (const std::string& item : split(v, ',')) {
          long i;
          ok = ok && parse_int(item, i);
        }
        break;
      case ValueType::expression:
        try {
          Expression::parse(v);
        } catch (const ExpressionError& e) {
          throw ConfigError(where + key + ": " + e.what(), entry.line, key);
        }
        break;
    }
    if (!ok)
      throw ConfigError(where + key + ": expected " + type_name(spec->type) + ", got '" + v + "'", entry.line, key);
  }
}

Command parse_command(const std::string& name) {
  if (name == "solve") return Command::solve;
  if (name == "verify") return Command::verify;
  if (name == "oracle") return Command::oracle;
  if (name == "converge") return Command::converge;
  if (name == "bounds") return Command::bounds;
  throw DomainError("unknown command '" + name + "'");
}

const char* command_name(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::verify: return "verify";
    case Command::oracle: return "oracle";
    case Command::converge: return "converge";
    case Command::bounds: return "bounds";
  }
  return "?";
}

MetricField build_metric(const MetricSpec& spec) {
  std::string name = spec.name;
  std::map<std::string, std::string> p = spec.parameters;
  // Inline form name(arg, ...).
  const std::size_t open = name.find('(');
  if (open != std::string::npos) {
    if (name.back() != ')') throw DomainError("malformed metric '" + spec.name + "'");
    const std::string args = name.substr(open + 1, name.size() - open - 2);
    name = trim(name.substr(0, open));
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char c : args) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == ',' && depth == 0) {
        parts.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(trim(cur));
    const auto assign = [&](std::initializer_list<const char*> keys) {
      if (parts.size() != keys.size())
        throw DomainError("metric " + name + " takes " + std::to_string(keys.size()) + " arguments");
      std::size_t i = 0;
      for (const char* k : keys) p[k] = parts[i++];
    };
    if (name == "conformal") assign({"f"});
    else if (name == "warped") assign({"phi"});
    else if (name == "diagonal") assign({"d1", "d2", "d3"});
    else if (name == "custom") assign({"g11", "g12", "g13", "g22", "g23", "g33"});
    else throw DomainError("metric " + name + " takes no arguments");
  }
  const auto expr = [&](const std::string& key, const char* fallback = nullptr) {
    const auto it = p.find(key);
    if (it != p.end()) return Expression::parse(it->second);
    if (fallback) return Expression::parse(fallback);
    throw DomainError("metric " + name + " needs metric." + key);
  };
  MetricField m = metrics::euclidean();
  if (name == "euclidean") m = metrics::euclidean();
  else if (name == "conformal") m = metrics::conformal(expr("f"));
  else if (name == "warped") m = metrics::warped(expr("phi"));
  else if (name == "diagonal") m = metrics::diagonal(expr("d1", "1"), expr("d2", "1"), expr("d3", "1"));
  else if (name == "custom")
    m = metrics::custom({expr("g11", "1"), expr("g12", "0"), expr("g13", "0"), expr("g22", "1"), expr("g23", "0"),
                         expr("g33", "1")});
  else throw DomainError("unknown metric '" + name + "'");
  return spec.finite_differences ? m.with_finite_differences(spec.fd_step) : m;
}

RunConfig load_run_config(const ConfigDocument& doc) {
  validate_config(doc);
  const Reader r(doc);
  RunConfig c;

  try {
    c.command = parse_command(r.text("run.command"));
  } catch (const DomainError& e) {
    r.fail("run.command", e.what());
  }
  if (auto out = r.raw("run.output")) c.output_dir = *out;

  c.metric.name = r.text("metric.name");
  for (const char* k : {"f", "phi", "d1", "d2", "d3", "g11", "g12", "g13", "g22", "g23", "g33"})
    if (auto v = doc.find(std::string("metric.") + k)) c.metric.parameters[k] = v->value;
  const std::string deriv = r.text("metric.derivatives");
  if (deriv != "analytic" && deriv != "finite_difference")
    r.fail("metric.derivatives", "expected analytic or finite_difference");
  c.metric.finite_differences = deriv == "finite_difference";
  c.metric.fd_step = r.real("metric.fd_step");
  if (!(c.metric.fd_step > 0)) r.fail("metric.fd_step", "must be positive");
  try {
    build_metric(c.metric);
  } catch (const Error& e) {
    r.fail("metric.name", e.what());
  }

  const auto grid_size_ok = [](int n) { return n >= 9 && n % 2 == 1; };
  c.n = r.integer("grid.n");
  if (!grid_size_ok(c.n)) r.fail("grid.n", "must be odd and at least 9");
  for (const std::string& item : split(r.text("grid.sizes"), ',')) {
    long v = 0;
    parse_int(item, v);
    if (!grid_size_ok(int(v))) r.fail("grid.sizes", "size " + item + " must be odd and at least 9");
    c.sizes.push_back(int(v));
  }
  if (c.command == Command::converge && c.sizes.size() < 3) r.fail("grid.sizes", "converge needs at least 3 sizes");

  try {
    c.solver.method = parse_solver_method(r.text("solver.method"));
  } catch (const DomainError& e) {
    r.fail("solver.method", e.what());
  }
  c.solver.tolerance = r.real("solver.tolerance");
  if (!(c.solver.tolerance > 0)) r.fail("solver.tolerance", "must be positive");
  c.solver.max_iterations = r.integer("solver.max_iterations");
  if (c.solver.max_iterations < 1) r.fail("solver.max_iterations", "must be at least 1");
  c.solver.sor_omega = r.real("solver.sor_omega");
  if (c.solver.sor_omega < 0 || c.solver.sor_omega >= 2) r.fail("solver.sor_omega", "must lie in [0, 2)");
  c.continuation_steps = r.integer("solver.continuation_steps");
  if (c.continuation_steps < 0) r.fail("solver.continuation_steps", "must be nonnegative");

  c.theta_samples = r.integer("levels.samples");
  if (c.theta_samples < 2) r.fail("levels.samples", "need at least 2 levels");
  if (auto d = r.optional_real("levels.delta_reg")) {
    if (!(*d > 0)) r.fail("levels.delta_reg", "must be positive");
    c.delta_reg = *d;
  }
  c.plots = r.boolean("levels.plots");
  c.meshes = r.boolean("levels.meshes");

  const std::string variant = r.text("inequality.variant");
  if (variant == "both")
    c.variants = {InequalityVariant::cube, InequalityVariant::dirichlet};
  else
    try {
      c.variants = {parse_variant(variant)};
    } catch (const DomainError& e) {
      r.fail("inequality.variant", e.what());
    }
  c.tolerance = r.real("inequality.tolerance");
  if (c.tolerance < 0) r.fail("inequality.tolerance", "must be nonnegative");
  c.error_estimate = r.boolean("inequality.error_estimate");

  try {
    c.oracle_domain = parse_model_domain(r.text("oracle.domain"));
  } catch (const DomainError& e) {
    r.fail("oracle.domain", e.what());
  }
  if (c.oracle_domain == ModelDomain::ball) r.fail("oracle.domain", "manufactured cases need a flat face");
  c.oracle_cases = split(r.text("oracle.cases"), ',');
  for (const std::string& name : c.oracle_cases)
    if (name != "quadratic" && name != "linear" && name != "product")
      r.fail("oracle.cases", "unknown case '" + name + "'");
  c.quadrature_points = r.integer("oracle.points");
  if (c.quadrature_points < 4) r.fail("oracle.points", "need at least 4 points");
  c.probe_tolerance = r.real("oracle.tolerance");

  if (auto e = r.raw("converge.exact")) c.exact_solution = *e;
  c.converge_quantity = r.text("converge.quantity");
  if (c.converge_quantity != "manufactured" && c.converge_quantity != "slack")
    r.fail("converge.quantity", "expected manufactured or slack");
  if (c.command == Command::converge && c.converge_quantity == "manufactured" && c.exact_solution.empty())
    r.fail("converge.exact", "the manufactured study needs an exact solution");

  c.bounds.volume = r.optional_real("bounds.volume");
  c.bounds.width = r.optional_real("bounds.width");
  c.bounds.translation_length = r.optional_real("bounds.translation_length");
  c.bounds.constant_c = r.optional_real("bounds.constant_c");
  c.bounds.euler = r.optional_real("bounds.euler");
  c.bounds.bilipschitz = r.optional_real("bounds.bilipschitz");
  if (c.command == Command::bounds && !c.bounds.volume) r.fail("bounds.volume", "bounds needs a volume");
  return c;
}

}  // namespace hmap
