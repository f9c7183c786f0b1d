#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmap/bvp.hpp"
#include "hmap/inequality.hpp"
#include "hmap/metric.hpp"
#include "hmap/model_oracles.hpp"

namespace hmap {

// Sectioned key = value text:
//
//   # comment
//   [grid]
//   n = 33
//
// Keys are addressed as "section.key". Later assignments replace earlier ones.
class ConfigDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for command-line overrides
  };

  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::string& path);

  // "section.key=value"
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value, int line);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const Entry* find(const std::string& key) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

enum class ValueType { string, integer, real, boolean, int_list, expression };

struct KeySpec {
  const char* key;
  ValueType type;
  const char* fallback;  // nullptr when there is no default
  const char* help;
};

const std::vector<KeySpec>& config_schema();
// Markdown table of config_schema().
std::string schema_markdown();

// Rejects unknown keys and values that do not parse as their declared type.
void validate_config(const ConfigDocument& doc);

enum class Command { solve, verify, oracle, converge, bounds };

Command parse_command(const std::string& name);
const char* command_name(Command c);

struct MetricSpec {
  std::string name = "euclidean";
  std::map<std::string, std::string> parameters;
  bool finite_differences = false;
  double fd_step = 1e-3;
};

MetricField build_metric(const MetricSpec& spec);

struct RunConfig {
  Command command = Command::verify;
  MetricSpec metric;
  int n = 33;
  std::vector<int> sizes;
  SolverConfig solver;
  int continuation_steps = 0;
  int theta_samples = 32;
  double delta_reg = -1.0;
  std::string output_dir;
  std::vector<InequalityVariant> variants{InequalityVariant::cube};
  double tolerance = 1e-8;
  bool error_estimate = true;
  bool plots = true;
  bool meshes = false;
  ModelDomain oracle_domain = ModelDomain::half_ball;
  std::vector<std::string> oracle_cases;
  int quadrature_points = 32;
  double probe_tolerance = 1e-4;
  std::string exact_solution;
  std::string converge_quantity = "manufactured";
  TorusBoundInput bounds;
};

// Validates doc first; every semantic error names its line and key.
RunConfig load_run_config(const ConfigDocument& doc);

}  // namespace hmap
