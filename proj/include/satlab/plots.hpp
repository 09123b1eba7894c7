#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "satlab/eval.hpp"

namespace satlab {

struct PlotOutcome {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

/// Every curve in a report: explicit sweeps, obfuscation sweeps, and one
/// accuracy-vs-severity curve per corruption.
std::vector<Sweep> report_sweeps(const RobustnessReport& r);

/// File stem for a sweep name: lower-case, [a-z0-9-] only.
std::string plot_stem(const std::string& name);

/// Writes <stem>.ppm (a line chart) and <stem>.tsv (the plotted values, %.17g) per curve.
/// Curves without points or with non-finite values are skipped with a warning.
PlotOutcome write_plots(const RobustnessReport& r, const std::filesystem::path& dir);

/// Reads a TSV sidecar back as (x, y) columns.
Sweep read_sidecar(const std::filesystem::path& path);

}  // namespace satlab
