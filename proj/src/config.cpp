#include "levelset/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "levelset/errors.hpp"

namespace levelset {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"model", {"family", "dimension", "scale", "smoothness", "rate", "frequencies", "weights", "shape", "wavenumber"}},
      {"domain", {"kind", "lower", "upper", "center", "radius"}},
      {"level", {"u"}},
      {"estimator",
       {"harmonics", "lines", "realizations", "samples", "step", "refinement", "length", "bootstrap", "max_order",
        "direction", "delta", "radius", "steps", "stability", "export_grid", "export_points"}},
      {"shape", {"kind", "center", "radius", "point", "normal", "points"}},
      {"run", {"seed", "jobs", "out", "format"}},
  };
  return s;
}

const std::set<std::string> axis_keys{"family", "scale", "smoothness", "rate", "frequencies", "weights"};

// Keys each family accepts besides "family" (and "dimension" where noted).
const std::map<std::string, std::set<std::string>>& family_keys() {
  static const std::map<std::string, std::set<std::string>> s{
      {"isotropic_gaussian", {"dimension", "scale"}},
      {"matern", {"dimension", "smoothness", "scale"}},
      {"ornstein_uhlenbeck", {"dimension", "rate"}},
      {"cosine_atoms", {"frequencies", "weights"}},
      {"anisotropic_gaussian", {"shape"}},
      {"product_split", {"dimension"}},
      {"random_plane_wave", {"dimension", "wavenumber"}},
  };
  return s;
}

std::optional<int> axis_index(const std::string& section) {
  const std::string prefix = "model.axis";
  if (section.rfind(prefix, 0) != 0 || section.size() == prefix.size()) return std::nullopt;
  int index = 0;
  const char* first = section.data() + prefix.size();
  const char* last = section.data() + section.size();
  auto [ptr, ec] = std::from_chars(first, last, index);
  if (ec != std::errc() || ptr != last || index < 1 || *first == '0') return std::nullopt;
  return index;
}

const std::string* find(const IniSection& s, const std::string& key) {
  auto it = s.find(key);
  return it == s.end() ? nullptr : &it->second;
}

double real_or(const IniSection& s, const std::string& key, double fallback, const std::string& where) {
  const auto* v = find(s, key);
  return v ? parse_real(*v, where + "." + key) : fallback;
}

std::vector<double> reals_or(const IniSection& s, const std::string& key, std::vector<double> fallback,
                             const std::string& where) {
  const auto* v = find(s, key);
  return v ? parse_reals(*v, where + "." + key) : std::move(fallback);
}

int dimension_from(const IniSection& s, int fallback) {
  const auto* v = find(s, "dimension");
  if (!v) return fallback;
  const auto d = parse_count(*v, "model.dimension");
  if (d < 1 || d > 64) throw ConfigError("model.dimension must be between 1 and 64");
  return static_cast<int>(d);
}

SpectralModel one_model(const IniSection& s, const std::string& where, int default_dimension, bool axis) {
  const auto* fam = find(s, "family");
  if (!fam) throw ConfigError(where + ": missing key 'family'");
  const auto& allowed_by_family = family_keys();
  auto it = allowed_by_family.find(*fam);
  if (it == allowed_by_family.end()) throw ConfigError(where + ": unknown family '" + *fam + "'");
  if (axis && *fam == "product_split") throw ConfigError(where + ": product axes cannot be products");
  for (const auto& [key, value] : s) {
    if (key == "family") continue;
    if (!it->second.contains(key) || (axis && key == "dimension")) {
      throw ConfigError(where + ": key '" + key + "' does not apply to family '" + *fam + "'");
    }
  }
  const int d = axis ? 1 : dimension_from(s, default_dimension);
  try {
    if (*fam == "isotropic_gaussian") return SpectralModel::isotropic_gaussian(d, real_or(s, "scale", 1.0, where));
    if (*fam == "matern") {
      const auto* nu = find(s, "smoothness");
      if (!nu) throw ConfigError(where + ": matern requires 'smoothness'");
      return SpectralModel::matern(d, parse_real(*nu, where + ".smoothness"), real_or(s, "scale", 1.0, where));
    }
    if (*fam == "ornstein_uhlenbeck") return SpectralModel::ornstein_uhlenbeck(d, real_or(s, "rate", 1.0, where));
    if (*fam == "random_plane_wave") {
      const auto* k = find(s, "wavenumber");
      if (!k) throw ConfigError(where + ": random_plane_wave requires 'wavenumber'");
      return SpectralModel::random_plane_wave(d, parse_real(*k, where + ".wavenumber"));
    }
    if (*fam == "cosine_atoms") {
      const auto* f = find(s, "frequencies");
      const auto* w = find(s, "weights");
      if (!f || !w) throw ConfigError(where + ": cosine_atoms requires 'frequencies' and 'weights'");
      return SpectralModel::cosine_atoms(parse_rows(*f, where + ".frequencies"), parse_reals(*w, where + ".weights"));
    }
    if (*fam == "anisotropic_gaussian") {
      const auto* a = find(s, "shape");
      if (!a) throw ConfigError(where + ": anisotropic_gaussian requires 'shape'");
      const auto rows = parse_rows(*a, where + ".shape");
      const auto n = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd m(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != n) throw ConfigError(where + ".shape must be square");
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
      }
      return SpectralModel::anisotropic_gaussian(m);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": family '" + *fam + "' needs axis sections");
}

std::vector<double> require_reals(const IniSection& s, const std::string& key, const std::string& where) {
  const auto* v = find(s, key);
  if (!v) throw ConfigError(where + ": missing key '" + key + "'");
  return parse_reals(*v, where + "." + key);
}

LevelDomain domain_from(const IniSection& s, double level, int d) {
  const auto* kind = find(s, "kind");
  const std::string k = kind ? *kind : "box";
  LevelDomain dom;
  dom.level = level;
  if (k == "box") {
    for (const char* key : {"center", "radius"}) {
      if (find(s, key)) throw ConfigError(std::string("domain: key '") + key + "' does not apply to a box");
    }
    Box b;
    b.lower = reals_or(s, "lower", std::vector<double>(d, 0.0), "domain");
    b.upper = reals_or(s, "upper", std::vector<double>(d, 1.0), "domain");
    dom.region = b;
  } else if (k == "ball") {
    for (const char* key : {"lower", "upper"}) {
      if (find(s, key)) throw ConfigError(std::string("domain: key '") + key + "' does not apply to a ball");
    }
    Ball b;
    b.center = reals_or(s, "center", std::vector<double>(d, 0.0), "domain");
    b.radius = real_or(s, "radius", 1.0, "domain");
    dom.region = b;
  } else {
    throw ConfigError("domain.kind must be 'box' or 'ball'");
  }
  try {
    dom.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
  if (dom.dimension() != d) throw ConfigError("domain dimension does not match the model dimension");
  return dom;
}

Shape shape_from(const IniSection& s) {
  const auto* kind = find(s, "kind");
  if (!kind) throw ConfigError("shape: missing key 'kind'");
  auto only = [&](std::set<std::string> keys) {
    keys.insert("kind");
    for (const auto& [key, value] : s) {
      if (!keys.contains(key)) throw ConfigError("shape: key '" + key + "' does not apply to kind '" + *kind + "'");
    }
  };
  if (*kind == "sphere") {
    only({"center", "radius"});
    SphereShape sh{require_reals(s, "center", "shape"), real_or(s, "radius", 1.0, "shape")};
    if (sh.center.size() < 2) throw ConfigError("shape: a sphere needs dimension >= 2");
    if (!(sh.radius > 0.0)) throw ConfigError("shape.radius must be positive");
    return sh;
  }
  if (*kind == "hyperplane") {
    only({"point", "normal", "radius"});
    HyperplanePatch sh{require_reals(s, "point", "shape"), require_reals(s, "normal", "shape"),
                       real_or(s, "radius", 1.0, "shape")};
    if (sh.point.size() != sh.normal.size() || sh.point.size() < 2) {
      throw ConfigError("shape: point and normal must share a dimension >= 2");
    }
    double n2 = 0.0;
    for (double x : sh.normal) n2 += x * x;
    if (!(n2 > 0.0)) throw ConfigError("shape.normal must be nonzero");
    for (double& x : sh.normal) x /= std::sqrt(n2);
    if (!(sh.radius > 0.0)) throw ConfigError("shape.radius must be positive");
    return sh;
  }
  if (*kind == "points") {
    only({"points"});
    return PointSet{require_reals(s, "points", "shape")};
  }
  throw ConfigError("shape.kind must be 'sphere', 'hyperplane' or 'points'");
}

int shape_dimension(const Shape& shape) {
  if (const auto* s = std::get_if<SphereShape>(&shape)) return static_cast<int>(s->center.size());
  if (const auto* h = std::get_if<HyperplanePatch>(&shape)) return static_cast<int>(h->point.size());
  return 1;
}

nlohmann::json reals_json(const std::vector<double>& v) { return nlohmann::json(v); }

}  // namespace

double parse_real(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(x)) {
    throw ConfigError(what + ": expected a finite number, got '" + text + "'");
  }
  return x;
}

std::uint64_t parse_count(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::uint64_t x = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(what + ": expected a nonnegative integer, got '" + text + "'");
  }
  return x;
}

bool parse_flag(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(what + ": expected true or false, got '" + text + "'");
}

std::vector<double> parse_reals(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_real(part, what));
  if (out.empty()) throw ConfigError(what + ": expected a comma-separated list of numbers");
  return out;
}

std::vector<std::vector<double>> parse_rows(const std::string& text, const std::string& what) {
  std::vector<std::vector<double>> rows;
  for (const auto& part : split(text, ';')) rows.push_back(parse_reals(part, what));
  if (rows.empty()) throw ConfigError(what + ": expected rows separated by ';'");
  return rows;
}

IniDocument parse_ini(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  IniDocument doc;
  for (const auto& [name, section] : tree) {
    if (section.empty()) throw ConfigError("config: key '" + name + "' outside any section");
    auto& out = doc[name];
    for (const auto& [key, value] : section) {
      if (!value.empty()) throw ConfigError("config: nested key under '" + name + "." + key + "'");
      out[key] = trim(value.data());
    }
  }
  return doc;
}

SpectralModel model_from_sections(const IniSection& model, const std::map<int, IniSection>& axes) {
  const auto* fam = find(model, "family");
  if (fam && *fam == "product_split") {
    for (const auto& [key, value] : model) {
      if (key != "family" && key != "dimension") {
        throw ConfigError("model: key '" + key + "' does not apply to family 'product_split'");
      }
    }
    if (axes.empty()) throw ConfigError("model: product_split requires [model.axis1] ... sections");
    const int d = static_cast<int>(axes.size());
    if (axes.rbegin()->first != d) throw ConfigError("model: axis sections must be numbered 1..d without gaps");
    if (dimension_from(model, d) != d) throw ConfigError("model.dimension does not match the number of axes");
    std::vector<SpectralModel> parts;
    for (const auto& [index, section] : axes) {
      parts.push_back(one_model(section, "model.axis" + std::to_string(index), 1, true));
    }
    try {
      return SpectralModel::product_split(std::move(parts));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  if (!axes.empty()) throw ConfigError("model: axis sections are only valid for product_split");
  return one_model(model, "model", 1, false);
}

ExperimentConfig ExperimentConfig::from_ini(const IniDocument& doc) {
  std::map<int, IniSection> axes;
  for (const auto& [name, section] : doc) {
    if (auto index = axis_index(name)) {
      for (const auto& [key, value] : section) {
        if (!axis_keys.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
      }
      axes[*index] = section;
      continue;
    }
    auto it = schema().find(name);
    if (it == schema().end()) throw ConfigError("unknown section [" + name + "]");
    for (const auto& [key, value] : section) {
      if (!it->second.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
    }
  }

  ExperimentConfig cfg;
  static const IniSection empty;
  auto section = [&](const std::string& name) -> const IniSection& {
    auto it = doc.find(name);
    return it == doc.end() ? empty : it->second;
  };

  if (doc.contains("model")) {
    cfg.model_ = model_from_sections(section("model"), axes);
  } else if (!axes.empty()) {
    throw ConfigError("axis sections given without [model]");
  }

  cfg.level_ = real_or(section("level"), "u", 0.0, "level");

  if (doc.contains("shape")) {
    cfg.shape_ = shape_from(section("shape"));
    if (cfg.model_ && cfg.model_->dimension() != shape_dimension(*cfg.shape_)) {
      throw ConfigError("shape dimension does not match the model dimension");
    }
  }
  if (cfg.model_) {
    cfg.dimension_ = cfg.model_->dimension();
  } else if (cfg.shape_) {
    cfg.dimension_ = shape_dimension(*cfg.shape_);
  }

  if (doc.contains("domain")) {
    if (cfg.dimension_ == 0) throw ConfigError("[domain] requires [model] or [shape]");
    cfg.domain_ = domain_from(section("domain"), cfg.level_, cfg.dimension_);
  }

  const auto& est = section("estimator");
  auto& e = cfg.estimator;
  auto count = [&](const char* key, std::size_t& target, std::size_t minimum) {
    if (const auto* v = find(est, key)) {
      const auto n = parse_count(*v, std::string("estimator.") + key);
      if (n < minimum) {
        throw ConfigError(std::string("estimator.") + key + " must be at least " + std::to_string(minimum));
      }
      target = static_cast<std::size_t>(n);
    }
  };
  count("harmonics", e.harmonics, 1);
  count("lines", e.lines, 1);
  count("realizations", e.realizations, 1);
  count("samples", e.samples, 1000);
  count("bootstrap", e.bootstrap, 1);
  count("export_points", e.export_points, 2);
  if (const auto* v = find(est, "max_order")) {
    const auto m = parse_count(*v, "estimator.max_order");
    if (m < 1 || m > 16) throw ConfigError("estimator.max_order must be between 1 and 16");
    e.max_order = static_cast<int>(m);
  }
  e.step = real_or(est, "step", e.step, "estimator");
  if (e.step < 0.0) throw ConfigError("estimator.step must be nonnegative (0 selects the model default)");
  e.length = real_or(est, "length", e.length, "estimator");
  if (!(e.length > 0.0)) throw ConfigError("estimator.length must be positive");
  e.delta = real_or(est, "delta", e.delta, "estimator");
  if (!(e.delta > 0.0 && e.delta < 2.0)) throw ConfigError("estimator.delta must lie in (0, 2)");
  e.radius = real_or(est, "radius", e.radius, "estimator");
  if (!(e.radius > 0.0)) throw ConfigError("estimator.radius must be positive");
  e.stability = real_or(est, "stability", e.stability, "estimator");
  if (!(e.stability > 0.0)) throw ConfigError("estimator.stability must be positive");
  if (const auto* v = find(est, "refinement")) e.refinement = parse_flag(*v, "estimator.refinement");
  if (const auto* v = find(est, "export_grid")) e.export_grid = parse_flag(*v, "estimator.export_grid");
  if (const auto* v = find(est, "steps")) {
    e.steps = parse_reals(*v, "estimator.steps");
    for (double h : e.steps) {
      if (!(h > 0.0)) throw ConfigError("estimator.steps must be positive");
    }
  }
  if (const auto* v = find(est, "direction")) {
    e.direction = parse_reals(*v, "estimator.direction");
    double n2 = 0.0;
    for (double x : e.direction) n2 += x * x;
    if (!(n2 > 0.0)) throw ConfigError("estimator.direction must be nonzero");
    if (cfg.model_ && static_cast<int>(e.direction.size()) != cfg.model_->dimension()) {
      throw ConfigError("estimator.direction does not match the model dimension");
    }
  }

  const auto& run = section("run");
  auto& r = cfg.run;
  if (const auto* v = find(run, "seed")) r.seed = parse_count(*v, "run.seed");
  if (const auto* v = find(run, "jobs")) r.jobs = static_cast<std::size_t>(parse_count(*v, "run.jobs"));
  if (const auto* v = find(run, "out")) {
    if (v->empty()) throw ConfigError("run.out must not be empty");
    r.out = *v;
  }
  if (const auto* v = find(run, "format")) r.format = *v;
  if (r.format != "json" && r.format != "csv" && r.format != "both") {
    throw ConfigError("run.format must be json, csv or both");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return from_ini(parse_ini(in));
}

const SpectralModel& ExperimentConfig::model() const {
  if (!model_) throw ConfigError("this subcommand requires a [model] section");
  return *model_;
}

LevelDomain ExperimentConfig::domain() const {
  if (domain_) return *domain_;
  if (dimension_ == 0) throw ConfigError("this subcommand requires a [model] or [shape] section");
  const int d = dimension_;
  LevelDomain dom;
  dom.level = level_;
  dom.region = Box{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  return dom;
}

const Shape& ExperimentConfig::shape() const {
  if (!shape_) throw ConfigError("this subcommand requires a [shape] section");
  return *shape_;
}

std::vector<double> ExperimentConfig::direction() const {
  const int d = model().dimension();
  if (estimator.direction.empty()) {
    std::vector<double> v(d, 0.0);
    v[0] = 1.0;
    return v;
  }
  std::vector<double> v = estimator.direction;
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  for (double& x : v) x /= std::sqrt(n2);
  return v;
}

nlohmann::json model_to_json(const SpectralModel& model) {
  nlohmann::json j;
  j["family"] = model.family_name();
  j["dimension"] = model.dimension();
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, IsotropicGaussian>) {
          j["scale"] = f.scale;
        } else if constexpr (std::is_same_v<T, Matern>) {
          j["smoothness"] = f.smoothness;
          j["scale"] = f.scale;
        } else if constexpr (std::is_same_v<T, OrnsteinUhlenbeck>) {
          j["rate"] = f.rate;
        } else if constexpr (std::is_same_v<T, CosineAtoms>) {
          j["frequencies"] = f.frequencies;
          j["weights"] = f.weights;
        } else if constexpr (std::is_same_v<T, AnisotropicGaussian>) {
          nlohmann::json rows = nlohmann::json::array();
          for (Eigen::Index i = 0; i < f.shape.rows(); ++i) {
            std::vector<double> row(f.shape.cols());
            for (Eigen::Index k = 0; k < f.shape.cols(); ++k) row[k] = f.shape(i, k);
            rows.push_back(row);
          }
          j["shape"] = rows;
        } else if constexpr (std::is_same_v<T, ProductSplit>) {
          for (std::size_t i = 0; i < f.axes.size(); ++i) {
            j["axis" + std::to_string(i + 1)] = model_to_json(f.axes[i]);
          }
        } else if constexpr (std::is_same_v<T, RandomPlaneWave>) {
          j["wavenumber"] = f.wavenumber;
        }
      },
      model.family());
  return j;
}

nlohmann::json domain_to_json(const LevelDomain& domain) {
  nlohmann::json j;
  if (const auto* b = std::get_if<Box>(&domain.region)) {
    j["kind"] = "box";
    j["lower"] = reals_json(b->lower);
    j["upper"] = reals_json(b->upper);
  } else {
    const auto& ball = std::get<Ball>(domain.region);
    j["kind"] = "ball";
    j["center"] = reals_json(ball.center);
    j["radius"] = ball.radius;
  }
  return j;
}

nlohmann::json shape_to_json(const Shape& shape) {
  nlohmann::json j;
  if (const auto* s = std::get_if<SphereShape>(&shape)) {
    j["kind"] = "sphere";
    j["center"] = reals_json(s->center);
    j["radius"] = s->radius;
  } else if (const auto* h = std::get_if<HyperplanePatch>(&shape)) {
    j["kind"] = "hyperplane";
    j["point"] = reals_json(h->point);
    j["normal"] = reals_json(h->normal);
    j["radius"] = h->radius;
  } else {
    j["kind"] = "points";
    j["points"] = reals_json(std::get<PointSet>(shape).points);
  }
  return j;
}

nlohmann::json ExperimentConfig::resolved() const {
  nlohmann::json j;
  if (model_) j["model"] = model_to_json(*model_);
  if (dimension_ > 0) j["domain"] = domain_to_json(domain());
  j["estimator"]["direction"] = model_ ? direction() : estimator.direction;
  if (shape_) j["shape"] = shape_to_json(*shape_);
  j["level"]["u"] = level_;
  auto& e = j["estimator"];
  e["harmonics"] = estimator.harmonics;
  e["lines"] = estimator.lines;
  e["realizations"] = estimator.realizations;
  e["samples"] = estimator.samples;
  e["step"] = estimator.step;
  e["refinement"] = estimator.refinement;
  e["length"] = estimator.length;
  e["bootstrap"] = estimator.bootstrap;
  e["max_order"] = estimator.max_order;
  e["delta"] = estimator.delta;
  e["radius"] = estimator.radius;
  e["steps"] = estimator.steps;
  e["stability"] = estimator.stability;
  e["export_grid"] = estimator.export_grid;
  e["export_points"] = estimator.export_points;
  j["run"]["seed"] = run.seed;
  j["run"]["jobs"] = run.jobs;
  j["run"]["out"] = run.out;
  j["run"]["format"] = run.format;
  return j;
}

}  // namespace levelset
