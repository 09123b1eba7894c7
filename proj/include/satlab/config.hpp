#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "satlab/attacks.hpp"
#include "satlab/data.hpp"
#include "satlab/errors.hpp"
#include "satlab/style_transfer.hpp"
#include "satlab/training.hpp"

namespace satlab {

inline constexpr const char* kConfigSchema = "satlab-config/1";

/// Invalid configuration, with one diagnostic per offending field ("path: problem").
class ConfigValidationError : public ConfigError {
 public:
  explicit ConfigValidationError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct DataSection {
  std::string source = "cifar10";  // cifar10 | toy
  std::string root;                // default: $SATLAB_DATA
  std::vector<int> classes;        // empty: all ten, original labels
  std::size_t train_per_class = 0;  // 0: every sample of the selected classes
  std::size_t test_per_class = 0;
  std::size_t max_train_files = 5;
  std::string toy_kind = "blobs";
  int toy_classes = 2;
  std::size_t toy_train_per_class = 100;
  std::size_t toy_test_per_class = 50;
  int toy_channels = 3;
  int toy_height = 8;
  int toy_width = 8;
  double toy_sigma = 12.0;
  std::uint64_t toy_seed = 0;
};

struct ModelSection {
  std::string arch = "tiny-cnn";
  std::vector<int> widths;
  std::string checkpoint;         // input model for attack/evaluate/corruptions/obfuscation/style
  std::string source_checkpoint;  // transfer source for obfuscation; empty: train one
};

struct AttackSection {
  std::string name = "pgd";
  AttackConfig config;
  std::size_t samples = 0;  // 0: whole test split
  std::size_t batch_size = 100;
};

struct EvaluateSection {
  std::vector<AttackSection> attacks;
  bool correlation = true;  // correlation loss under the first attack
  std::vector<double> epsilon_sweep;  // PGD budgets for an accuracy-vs-epsilon curve
  std::size_t samples = 0;
};

struct CorruptionSection {
  std::string table;  // empty: built-in table
  std::vector<std::string> names;  // empty: every corruption in the table
  std::vector<int> severities{1, 2, 3, 4, 5};
  std::size_t samples = 0;
};

struct ObfuscationSection {
  AttackConfig base;
  std::vector<double> epsilons{8, 16, 32, 64, 128};
  std::vector<int> iterations{1, 2, 5, 10, 20};
  int source_epochs = 10;
  std::size_t samples = 0;
};

struct StyleSection {
  std::string content;
  std::string style;
  std::string init = "content";
  int iterations = 100;
  double style_weight = 1e3;
  double content_weight = 1.0;
  TapSelection style_taps = TapSelection::all_taps();
  TapSelection content_taps = TapSelection::penultimate();
  double step = 0.05;
  std::string output = "stylized.ppm";
};

struct RunConfig {
  std::string command = "train";
  std::uint64_t seed = 0;
  DataSection data;
  ModelSection model;
  TrainConfig train;
  AttackSection attack;
  EvaluateSection evaluate;
  CorruptionSection corruptions;
  ObfuscationSection obfuscation;
  StyleSection style;
};

const std::vector<std::string>& command_names();

/// The fully populated default document (every field present).
nlohmann::json default_config_json();

/// Defaults, then `file` (strict: unknown keys are errors), then `--set` overrides of the
/// form dotted.path=value (value parsed as JSON, else taken as a string). Throws
/// ConfigValidationError listing every bad field.
RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);
RunConfig parse_config(const nlohmann::json& doc, const std::vector<std::string>& overrides);

nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json attack_config_to_json(const AttackConfig& c);

/// data.root if set, else $SATLAB_DATA; a cifar-10-batches-bin child is used when present.
std::filesystem::path resolve_data_root(const DataSection& d);

}  // namespace satlab
