#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "hmap/config.hpp"

namespace hmap {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

struct RunOutcome {
  int exit_code = kExitPass;
  std::vector<std::string> artifacts;  // file names relative to the output directory
};

// Writes every artifact into a staging directory next to out_dir and moves
// them into place only when the command finished. Errors propagate with no
// artifacts left behind.
RunOutcome run_pipeline(const RunConfig& config, const std::string& out_dir, std::ostream& log);

struct PlotSeries {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_plot(const PlotSeries& series);

// Deterministic fixed-width formatting used by every CSV artifact.
std::string format_number(double x);

}  // namespace hmap
