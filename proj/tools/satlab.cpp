#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "satlab/commands.hpp"
#include "satlab/config.hpp"
#include "satlab/errors.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::uint64_t seed = 0;
};

int report_config_error(const satlab::ConfigError& e) {
  if (const auto* v = dynamic_cast<const satlab::ConfigValidationError*>(&e)) {
    std::cerr << "error: invalid configuration\n";
    for (const auto& d : v->diagnostics()) std::cerr << "  " << d << "\n";
  } else {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"satlab: stylized adversarial training and robustness evaluation"};
  app.require_subcommand(1);

  std::vector<std::pair<CLI::App*, std::string>> run_cmds;
  RunArgs args;
  for (const auto& name : satlab::command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " command");
    sub->add_option("--config", args.config, "JSON config file (defaults apply to absent fields)");
    sub->add_option("--set", args.overrides, "override a field: dotted.path=value")->take_all();
    sub->add_option("--out", args.out, "output directory")->required();
    sub->add_option("--seed", args.seed, "top-level seed");
    run_cmds.emplace_back(sub, name);
  }

  std::string report, plot_out;
  CLI::App* plots = app.add_subcommand("plots", "render the curves of a report as PPM plots with TSV sidecars");
  plots->add_option("--report", report, "report.json written by another command")->required();
  plots->add_option("--out", plot_out, "output directory")->required();

  app.add_subcommand("defaults", "print the fully populated default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("defaults")) {
      std::cout << satlab::default_config_json().dump(2) << "\n";
      return 0;
    }
    if (plots->parsed()) {
      const auto warnings = satlab::run_plots(report, plot_out, std::cout);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      return 0;
    }
    for (const auto& [sub, name] : run_cmds) {
      if (!sub->parsed()) continue;
      std::vector<std::string> overrides{"command=\"" + name + "\""};
      if (sub->count("--seed") > 0) overrides.push_back("seed=" + std::to_string(args.seed));
      overrides.insert(overrides.end(), args.overrides.begin(), args.overrides.end());
      const satlab::RunConfig cfg = satlab::load_config(args.config, overrides);
      satlab::run_command(cfg, args.out, std::cout);
      return 0;
    }
  } catch (const satlab::ConfigError& e) {
    return report_config_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
