#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "hmap/config.hpp"
#include "hmap/errors.hpp"
#include "hmap/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Harmonic level-set verification on the unit cube"};
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool quiet = false;
  bool schema = false;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--out", out_dir, "output directory (overrides run.output and HMAP_OUT_DIR)");
  app.add_option("--override", overrides, "section.key=value, applied after the file")->take_all();
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_flag("--schema", schema, "print the configuration schema and exit");
  CLI11_PARSE(app, argc, argv);

  if (schema) {
    std::cout << hmap::schema_markdown();
    return hmap::kExitPass;
  }

  try {
    hmap::ConfigDocument doc = config_path.empty() ? hmap::ConfigDocument{} : hmap::ConfigDocument::load(config_path);
    for (const std::string& o : overrides) doc.apply_override(o);
    const hmap::RunConfig cfg = hmap::load_run_config(doc);

    std::string dir = out_dir;
    if (dir.empty()) dir = cfg.output_dir;
    if (dir.empty())
      if (const char* env = std::getenv("HMAP_OUT_DIR")) dir = env;
    if (dir.empty()) dir = "hmap_out";

    std::ostringstream sink;
    std::ostream& log = quiet ? static_cast<std::ostream&>(sink) : std::cout;
    const hmap::RunOutcome outcome = hmap::run_pipeline(cfg, dir, log);
    if (!quiet) {
      log << hmap::command_name(cfg.command) << ": wrote " << outcome.artifacts.size() << " artifacts to " << dir
          << "\n";
      if (outcome.exit_code == hmap::kExitCheckFailed) log << "check failed\n";
    }
    return outcome.exit_code;
  } catch (const hmap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return hmap::kExitError;
}
