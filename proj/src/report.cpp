#include "levelset/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>

#include "levelset/csv.hpp"
#include "levelset/errors.hpp"

namespace levelset {

namespace {

void flatten(const nlohmann::json& j, const std::string& prefix, CsvTable& table) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, table);
  } else if (j.is_array() && !j.empty() && (j.front().is_object() || j.front().is_array())) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), table);
  } else if (j.is_number_float()) {
    table.add_row({prefix, format_double(j.get<double>())});
  } else if (j.is_string()) {
    table.add_row({prefix, j.get<std::string>()});
  } else {
    table.add_row({prefix, j.dump()});
  }
}

void write_table(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  CsvWriter w(out);
  w.row(table.header);
  for (const auto& row : table.rows) w.row(row);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

nlohmann::json to_json(const ExtReal& x) {
  if (x.is_infinite()) return "inf";
  return x.value();
}

nlohmann::json to_json_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json summary_json(const Report& report) {
  nlohmann::json j;
  j["tool"] = "levelset";
  j["version"] = LEVELSET_VERSION;
  j["schema_version"] = report_schema_version;
  j["subcommand"] = report.subcommand;
  j["status"] = report.error ? "incomplete" : "complete";
  j["timestamp"] = report.timestamp.empty() ? utc_timestamp() : report.timestamp;
  j["config"] = report.config;
  j["results"] = report.results;
  if (report.error) {
    j["error"] = {{"exit_code", report.error->exit_code},
                  {"kind", report.error->kind},
                  {"message", report.error->message}};
  } else {
    j["error"] = nullptr;
  }
  return j;
}

std::vector<std::filesystem::path> write_report(const Report& report, const std::filesystem::path& directory,
                                                const std::string& format) {
  if (format != "json" && format != "csv" && format != "both") {
    throw ConfigError("format must be json, csv or both");
  }
  std::filesystem::create_directories(directory);
  std::vector<std::filesystem::path> written;
  const auto summary = summary_json(report);
  if (format == "json" || format == "both") {
    const auto path = directory / (report.subcommand + ".json");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << summary.dump(2) << '\n';
    written.push_back(path);
  }
  if (format == "csv" || format == "both") {
    CsvTable flat{"summary", {"key", "value"}, {}};
    for (const char* key : {"tool", "version", "schema_version", "subcommand", "status", "timestamp"}) {
      flatten(summary[key], key, flat);
    }
    flatten(summary["results"], "results", flat);
    if (report.error) flatten(summary["error"], "error", flat);
    const auto path = directory / (report.subcommand + "_summary.csv");
    write_table(flat, path);
    written.push_back(path);
    for (const auto& table : report.tables) {
      const auto tpath = directory / (report.subcommand + "_" + table.name + ".csv");
      write_table(table, tpath);
      written.push_back(tpath);
    }
  }
  return written;
}

}  // namespace levelset
