#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "satlab/architectures.hpp"
#include "satlab/config.hpp"
#include "satlab/data.hpp"
#include "satlab/model.hpp"

namespace satlab {

inline constexpr const char* kManifestSchema = "satlab-manifest/1";

struct DataSplits {
  Dataset train;
  Dataset test;
};

/// Loads and normalizes both splits described by `d`.
DataSplits load_data(const DataSection& d);

ArchSpec arch_for(const ModelSection& m, const Dataset& data);

/// Runs cfg.command and writes manifest.json plus the command's outputs under `out`.
/// Progress goes to `log`. Errors propagate as exceptions.
void run_command(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Renders every sweep of a report into <out>/plots. Returns the warnings emitted.
std::vector<std::string> run_plots(const std::filesystem::path& report, const std::filesystem::path& out,
                                   std::ostream& log);

}  // namespace satlab
