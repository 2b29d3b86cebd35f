#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "levelset/crofton.hpp"
#include "levelset/kacrice.hpp"
#include "levelset/spectral.hpp"

namespace levelset {

using IniSection = std::map<std::string, std::string>;
using IniDocument = std::map<std::string, IniSection>;

/// Reads a sectioned key = value file. Duplicate sections or keys and keys
/// outside any section are configuration errors.
IniDocument parse_ini(std::istream& in);

struct EstimatorSettings {
  std::size_t harmonics = 512;
  std::size_t lines = 1000;
  std::size_t realizations = 100;
  std::size_t samples = 1000000;
  double step = 0.0;  // 0: model default
  bool refinement = true;
  double length = 1.0;
  std::size_t bootstrap = 1000;
  int max_order = 4;
  std::vector<double> direction;  // empty: first coordinate axis
  double delta = 0.5;
  double radius = 1.0;
  std::vector<double> steps{1e-2, 1e-3, 1e-4, 1e-5};
  double stability = 0.2;
  bool export_grid = false;
  std::size_t export_points = 101;
};

struct RunSettings {
  std::uint64_t seed = 0;
  std::size_t jobs = 0;  // 0: all cores
  std::string out = "results";
  std::string format = "both";  // json | csv | both
};

class ExperimentConfig {
public:
  /// Validates the document against the schema; throws ConfigError.
  static ExperimentConfig from_ini(const IniDocument& doc);
  static ExperimentConfig load(const std::filesystem::path& path);

  bool has_model() const { return model_.has_value(); }
  /// Throws ConfigError when the [model] section is missing.
  const SpectralModel& model() const;
  /// The [domain] section, or the unit box [0,1]^d when absent; d comes
  /// from the model, else from the shape.
  LevelDomain domain() const;
  bool has_shape() const { return shape_.has_value(); }
  const Shape& shape() const;
  double level() const { return level_; }

  EstimatorSettings estimator;
  RunSettings run;

  /// Unit direction from the estimator block (normalized), default e_1.
  std::vector<double> direction() const;

  /// Every setting with defaults filled in, as embedded in reports.
  nlohmann::json resolved() const;

private:
  std::optional<SpectralModel> model_;
  std::optional<LevelDomain> domain_;
  std::optional<Shape> shape_;
  double level_ = 0.0;
  int dimension_ = 0;
};

/// Model parameters as a flat key/value block (axes of a product model as
/// nested objects "axis1", "axis2", ...).
nlohmann::json model_to_json(const SpectralModel& model);
SpectralModel model_from_sections(const IniSection& model, const std::map<int, IniSection>& axes);

nlohmann::json domain_to_json(const LevelDomain& domain);
nlohmann::json shape_to_json(const Shape& shape);

// Value parsers shared with the command line; all throw ConfigError.
double parse_real(const std::string& text, const std::string& what);
std::uint64_t parse_count(const std::string& text, const std::string& what);
bool parse_flag(const std::string& text, const std::string& what);
std::vector<double> parse_reals(const std::string& text, const std::string& what);
std::vector<std::vector<double>> parse_rows(const std::string& text, const std::string& what);

}  // namespace levelset
