#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "levelset/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Level sets of stationary Gaussian fields: Kac-Rice, Crofton and crossing experiments"};
  app.set_version_flag("--version", std::string(LEVELSET_VERSION));

  std::string subcommand;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  std::optional<std::string> format;

  app.add_option("subcommand", subcommand, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(levelset::subcommand_names()));
  app.add_option("--config", config_path, "Experiment configuration file")->required();
  app.add_option("--seed", seed, "Override run.seed");
  app.add_option("--out", out, "Override run.out (output directory)");
  app.add_option("--jobs", jobs, "Override run.jobs (0: all cores)");
  app.add_option("--format", format, "Override run.format")->check(CLI::IsMember({"json", "csv", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(levelset::ExitCode::config_error);
  }

  levelset::RunOverrides overrides{seed, out, jobs, format};
  return levelset::run_from_file(subcommand, config_path, overrides, std::cerr);
}
