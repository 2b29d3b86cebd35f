#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "levelset/extended_real.hpp"

namespace levelset {

inline constexpr int report_schema_version = 1;

/// A plot-ready table written as <subcommand>_<name>.csv.
struct CsvTable {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }
};

struct ReportError {
  int exit_code = 0;
  std::string kind;
  std::string message;
};

struct Report {
  std::string subcommand;
  nlohmann::json config;
  nlohmann::json results = nlohmann::json::object();
  std::vector<CsvTable> tables;
  std::optional<ReportError> error;
  std::string timestamp;  // ISO 8601 UTC; filled by write_report when empty
};

/// Finite values as numbers, +inf as the string "inf".
nlohmann::json to_json(const ExtReal& x);
/// Non-finite doubles as the strings "inf", "-inf", "nan".
nlohmann::json to_json_number(double x);

/// The summary document: tool, version, schema_version, subcommand, status
/// (complete | incomplete), timestamp, config, results and error.
nlohmann::json summary_json(const Report& report);

/// Writes the summary (json), the tables plus a flattened summary table
/// (csv), or both, into `directory`. Returns the paths written.
std::vector<std::filesystem::path> write_report(const Report& report, const std::filesystem::path& directory,
                                                const std::string& format);

std::string utc_timestamp();

}  // namespace levelset
