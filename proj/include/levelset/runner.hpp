#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "levelset/config.hpp"
#include "levelset/report.hpp"

namespace levelset {

enum class ExitCode : int {
  ok = 0,
  internal_error = 1,
  config_error = 2,
  gate_violation = 3,
  numerical_failure = 4,
};

const std::vector<std::string>& subcommand_names();

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  std::optional<std::string> format;
};

void apply_overrides(ExperimentConfig& config, const RunOverrides& overrides);

struct RunOutcome {
  ExitCode exit_code = ExitCode::ok;
  Report report;
};

/// Runs one subcommand and fills the report. Failures are mapped to exit
/// codes and recorded in the report, which is then marked incomplete;
/// results computed before the failure are kept.
RunOutcome run_subcommand(const std::string& name, const ExperimentConfig& config);

/// Load, override, run and write the report files. Diagnostics go to `log`.
int run_from_file(const std::string& name, const std::filesystem::path& config_path, const RunOverrides& overrides,
                  std::ostream& log);

}  // namespace levelset
