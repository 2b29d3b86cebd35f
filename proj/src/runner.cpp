#include "levelset/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "levelset/crofton.hpp"
#include "levelset/csv.hpp"
#include "levelset/errors.hpp"
#include "levelset/fieldsim.hpp"
#include "levelset/kacrice.hpp"
#include "levelset/parallel.hpp"
#include "levelset/spectral.hpp"

namespace levelset {

namespace {

using nlohmann::json;

std::string num(double x) { return format_double(x); }
std::string num(std::size_t x) { return std::to_string(x); }

json rice_json(const RiceValue& r) {
  return {{"value", to_json(r.value)}, {"method", to_string(r.method)}, {"standard_error", r.standard_error}};
}

// (estimate - target) / stderr, or null when undefined.
json z_score(double estimate, double stderr_, const ExtReal& target) {
  if (target.is_infinite() || !(stderr_ > 0.0)) return nullptr;
  return (estimate - target.value()) / stderr_;
}

RunningStats stats_of(const std::vector<double>& xs) {
  RunningStats s;
  for (double x : xs) s.add(x);
  return s;
}

double line_step(const ExperimentConfig& cfg) {
  return cfg.estimator.step > 0.0 ? cfg.estimator.step : default_grid_step(cfg.model()) / 100.0;
}

std::size_t jobs_of(const ExperimentConfig& cfg) { return resolve_jobs(cfg.run.jobs); }

CsvTable line_table(const std::vector<LineRecord>& records, int d) {
  CsvTable t{"lines", {}, {}};
  for (int i = 0; i < d; ++i) t.header.push_back("v" + std::to_string(i + 1));
  for (int i = 0; i < d; ++i) t.header.push_back("y" + std::to_string(i + 1));
  for (const char* h : {"t_min", "t_max", "count", "weight", "flagged"}) t.header.push_back(h);
  for (const auto& r : records) {
    std::vector<std::string> row;
    for (double x : r.v) row.push_back(num(x));
    for (double x : r.y) row.push_back(num(x));
    row.push_back(num(r.t_min));
    row.push_back(num(r.t_max));
    row.push_back(num(r.count));
    row.push_back(num(r.weight));
    row.push_back(r.flagged ? "true" : "false");
    t.add_row(std::move(row));
  }
  return t;
}

void require_finite_for_refinement(const SpectralModel& model) {
  if (!lambda2_matrix(model).finite) {
    throw GateViolation("crossing refinement requires a finite second spectral moment matrix; "
                        "use the diverge subcommand for rough fields or set estimator.refinement = false");
  }
}

void cmd_lambda2(const ExperimentConfig& cfg, Report& rep) {
  const auto& model = cfg.model();
  const MomentMatrix m = lambda2_matrix(model);
  const int d = m.dimension;
  json rows = json::array();
  CsvTable t{"matrix", {"row", "col", "value"}, {}};
  for (int i = 0; i < d; ++i) {
    json row = json::array();
    for (int j = 0; j < d; ++j) {
      row.push_back(to_json(m(i, j)));
      t.add_row({std::to_string(i + 1), std::to_string(j + 1), m(i, j).is_finite() ? num(m(i, j).value()) : "inf"});
    }
    rows.push_back(row);
  }
  json basis = json::array();
  for (Eigen::Index c = 0; c < m.finite_subspace.cols(); ++c) {
    std::vector<double> col(d);
    for (int i = 0; i < d; ++i) col[i] = m.finite_subspace(i, c);
    basis.push_back(col);
  }
  auto& r = rep.results;
  r["family"] = model.family_name();
  r["dimension"] = d;
  r["finite"] = m.finite;
  r["matrix"] = rows;
  r["finite_subspace"] = basis;
  r["finite_subspace_dimension"] = m.finite_subspace.cols();
  rep.tables.push_back(std::move(t));
}

void cmd_f_lambda2(const ExperimentConfig& cfg, Report& rep) {
  const MomentMatrix m = lambda2_matrix(cfg.model());
  const RiceValue sphere = f_lambda2_sphere(m);
  rep.results["sphere"] = rice_json(sphere);
  const RiceValue mc = f_lambda2_mc(m, cfg.estimator.samples, cfg.run.seed, jobs_of(cfg));
  rep.results["gaussian_mc"] = rice_json(mc);
  rep.results["samples"] = cfg.estimator.samples;
  const double se = std::hypot(sphere.standard_error, mc.standard_error);
  rep.results["z_score"] = mc.value.is_finite() ? z_score(mc.value.value(), se, sphere.value) : json(nullptr);
  CsvTable t{"methods", {"method", "value", "standard_error"}, {}};
  for (const auto* v : {&sphere, &mc}) {
    t.add_row({to_string(v->method), v->value.to_string(), num(v->standard_error)});
  }
  rep.tables.push_back(std::move(t));
}

void cmd_expected_volume(const ExperimentConfig& cfg, Report& rep) {
  const LevelDomain dom = cfg.domain();
  const RiceValue v = expected_volume(cfg.model(), dom);
  auto& r = rep.results;
  r["value"] = to_json(v.value);
  r["method"] = to_string(v.method);
  r["standard_error"] = v.standard_error;
  r["level"] = dom.level;
  r["lebesgue"] = dom.lebesgue();
  r["f_lambda2"] = rice_json(f_lambda2_sphere(lambda2_matrix(cfg.model())));
  CsvTable t{"value", {"level", "value", "standard_error", "method"}, {}};
  t.add_row({num(dom.level), v.value.to_string(), num(v.standard_error), to_string(v.method)});
  rep.tables.push_back(std::move(t));
}

CsvTable counts_table(const LineCounts& counts) {
  CsvTable t{"counts", {"realization", "crossings", "up_crossings"}, {}};
  for (std::size_t i = 0; i < counts.all.size(); ++i) {
    t.add_row({num(i), num(counts.all[i]), num(counts.up[i])});
  }
  return t;
}

void cmd_crossings_1d(const ExperimentConfig& cfg, Report& rep) {
  const DirectionalSpectrum spec(cfg.model(), cfg.direction());
  const double u = cfg.level();
  const double T = cfg.estimator.length;
  const double h = line_step(cfg);
  auto& r = rep.results;
  const ExtReal expected = expected_crossings_1d(spec.lambda2(), u, T);
  r["lambda2"] = to_json(spec.lambda2());
  r["expected"] = to_json(expected);
  r["expected_up"] = to_json(expected * 0.5);
  r["step"] = h;
  r["length"] = T;

  const LineCounts c = simulate_line_counts(spec, u, T, h, cfg.estimator.realizations, cfg.run.seed, jobs_of(cfg));
  const double span = static_cast<double>(c.points - 1) * h;
  r["points"] = c.points;
  r["embedding_size"] = c.embedding_size;
  r["clipped_fraction"] = c.clipped_fraction;
  r["grid_expectation"] = grid_crossing_expectation(spec.covariance(h), span, h);
  std::vector<double> all(c.all.begin(), c.all.end());
  std::vector<double> up(c.up.begin(), c.up.end());
  const auto sa = stats_of(all);
  const auto su = stats_of(up);
  r["realizations"] = c.all.size();
  r["mean"] = sa.mean();
  r["standard_error"] = sa.standard_error();
  r["z_score"] = z_score(sa.mean(), sa.standard_error(), expected);
  r["mean_up"] = su.mean();
  r["standard_error_up"] = su.standard_error();
  rep.tables.push_back(counts_table(c));
}

void cmd_second_moment_1d(const ExperimentConfig& cfg, Report& rep) {
  const DirectionalSpectrum spec(cfg.model(), cfg.direction());
  spec.finite_lambda2();
  const double u = cfg.level();
  const double T = cfg.estimator.length;
  auto& r = rep.results;
  r["length"] = T;
  r["lambda2"] = to_json(spec.lambda2());
  r["expected"] = to_json(expected_crossings_1d(spec.lambda2(), u, T));
  for (auto mode : {CrossingMode::all, CrossingMode::up}) {
    const SecondMoment sm = second_factorial_moment_1d(spec, u, T, mode);
    r[mode == CrossingMode::all ? "quadrature" : "quadrature_up"] = {
        {"value", sm.value}, {"regular", sm.regular}, {"singular", sm.singular}, {"singular_lags", sm.singular_lags}};
  }

  const double h = line_step(cfg);
  r["step"] = h;
  const LineCounts c = simulate_line_counts(spec, u, T, h, cfg.estimator.realizations, cfg.run.seed, jobs_of(cfg));
  r["realizations"] = c.all.size();
  r["clipped_fraction"] = c.clipped_fraction;
  auto factorial = [](const std::vector<std::size_t>& n) {
    std::vector<double> out;
    out.reserve(n.size());
    for (std::size_t k : n) out.push_back(static_cast<double>(k) * (static_cast<double>(k) - 1.0));
    return out;
  };
  const auto sa = stats_of(factorial(c.all));
  const auto su = stats_of(factorial(c.up));
  r["mc"] = {{"value", sa.mean()}, {"standard_error", sa.standard_error()}};
  r["mc_up"] = {{"value", su.mean()}, {"standard_error", su.standard_error()}};
  r["z_score"] = z_score(sa.mean(), sa.standard_error(), r["quadrature"]["value"].get<double>());
  r["z_score_up"] = z_score(su.mean(), su.standard_error(), r["quadrature_up"]["value"].get<double>());
  rep.tables.push_back(counts_table(c));
}

LinePlan line_plan(const ExperimentConfig& cfg) {
  LinePlan plan;
  plan.lines = cfg.estimator.lines;
  plan.domain = cfg.domain();
  plan.seed = cfg.run.seed;
  plan.refinement = cfg.estimator.refinement;
  plan.step = cfg.estimator.step;
  plan.jobs = jobs_of(cfg);
  return plan;
}

void cmd_crofton(const ExperimentConfig& cfg, Report& rep) {
  const auto& model = cfg.model();
  if (cfg.estimator.refinement) require_finite_for_refinement(model);
  const LinePlan plan = line_plan(cfg);
  const HarmonicEnsemble field = HarmonicEnsemble::sample(model, cfg.estimator.harmonics, cfg.run.seed, 0);
  auto& r = rep.results;
  const RiceValue expected = expected_volume(model, plan.domain);
  r["expected"] = to_json(expected.value);

  if (cfg.estimator.export_grid) {
    const int d = model.dimension();
    const double total = std::pow(static_cast<double>(cfg.estimator.export_points), d);
    if (total > 1e7) throw ConfigError("estimator.export_points^d exceeds 1e7 grid values");
    std::vector<double> lower(d);
    std::vector<double> upper(d);
    if (const auto* b = std::get_if<Box>(&plan.domain.region)) {
      lower = b->lower;
      upper = b->upper;
    } else {
      const auto& ball = std::get<Ball>(plan.domain.region);
      for (int i = 0; i < d; ++i) {
        lower[i] = ball.center[i] - ball.radius;
        upper[i] = ball.center[i] + ball.radius;
      }
    }
    const std::vector<std::size_t> counts(d, cfg.estimator.export_points);
    const auto path = std::filesystem::path(cfg.run.out) / "crofton_field.bin";
    std::filesystem::create_directories(cfg.run.out);
    std::ofstream out(path, std::ios::binary);
    write_grid_dump(out, field, lower, upper, counts);
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
    r["grid_dump"] = path.filename().string();
  }

  const CroftonEstimate est = crofton_estimate(field, cfg.level(), plan, 0, true);
  r["value"] = est.value;
  r["standard_error"] = est.standard_error;
  r["lines"] = est.n_lines;
  r["flagged_lines"] = est.n_flagged;
  r["flagged_fraction"] = static_cast<double>(est.n_flagged) / static_cast<double>(est.n_lines);
  r["z_score"] = z_score(est.value, est.standard_error, expected.value);
  r["harmonics"] = field.size();
  rep.tables.push_back(line_table(est.records, model.dimension()));
}

void cmd_moments(const ExperimentConfig& cfg, Report& rep) {
  const auto& model = cfg.model();
  const LinePlan plan = line_plan(cfg);
  MomentPlan mp;
  mp.realizations = cfg.estimator.realizations;
  mp.harmonics = cfg.estimator.harmonics;
  mp.max_order = cfg.estimator.max_order;
  mp.bootstrap = cfg.estimator.bootstrap;
  mp.stability_threshold = cfg.estimator.stability;
  auto& r = rep.results;
  const RiceValue expected = expected_volume(model, plan.domain);
  r["expected"] = to_json(expected.value);
  const MomentReport m = estimate_moments(model, cfg.level(), plan, mp);
  r["realizations"] = m.values.size();
  r["mean"] = m.mean;
  r["standard_error"] = m.standard_error;
  r["z_score"] = z_score(m.mean, m.standard_error, expected.value);
  r["total_lines"] = m.total_lines;
  r["flagged_lines"] = m.flagged_lines;
  r["flagged_fraction"] = static_cast<double>(m.flagged_lines) / static_cast<double>(std::max<std::size_t>(1, m.total_lines));
  json moments = json::array();
  CsvTable mt{"moments", {"order", "value", "ci_low", "ci_high", "half_value", "relative_change", "finite", "stable"}, {}};
  bool all_stable = true;
  for (const auto& e : m.moments) {
    moments.push_back({{"order", e.order},
                       {"value", to_json_number(e.value)},
                       {"ci_low", to_json_number(e.ci_low)},
                       {"ci_high", to_json_number(e.ci_high)},
                       {"half_value", to_json_number(e.half_value)},
                       {"relative_change", to_json_number(e.relative_change)},
                       {"finite", e.finite},
                       {"stable", e.stable}});
    all_stable = all_stable && e.finite && e.stable;
    mt.add_row({std::to_string(e.order), num(e.value), num(e.ci_low), num(e.ci_high), num(e.half_value),
                num(e.relative_change), e.finite ? "true" : "false", e.stable ? "true" : "false"});
  }
  r["moments"] = moments;
  r["all_finite_and_stable"] = all_stable;
  CsvTable rt{"realizations", {"realization", "value", "standard_error"}, {}};
  for (std::size_t i = 0; i < m.values.size(); ++i) rt.add_row({num(i), num(m.values[i]), num(m.standard_errors[i])});
  rep.tables.push_back(std::move(rt));
  rep.tables.push_back(std::move(mt));
}

void cmd_diverge(const ExperimentConfig& cfg, Report& rep) {
  const DirectionalSpectrum spec(cfg.model(), cfg.direction());
  const double u = cfg.level();
  const double T = cfg.estimator.length;
  std::vector<double> steps = cfg.estimator.steps;
  std::sort(steps.begin(), steps.end(), std::greater<>());
  auto& r = rep.results;
  r["lambda2"] = to_json(spec.lambda2());
  r["expected"] = to_json(expected_crossings_1d(spec.lambda2(), u, T));
  r["length"] = T;
  r["realizations"] = cfg.estimator.realizations;
  r["sweep"] = json::array();
  CsvTable t{"sweep", {"step", "points", "mean", "standard_error", "grid_oracle", "z_score"}, {}};
  std::vector<double> lx;
  std::vector<double> ly;
  bool increasing = true;
  double previous = -1.0;
  for (double h : steps) {
    const LineCounts c =
        simulate_line_counts(spec, u, T, h, cfg.estimator.realizations, cfg.run.seed, jobs_of(cfg));
    std::vector<double> all(c.all.begin(), c.all.end());
    const auto s = stats_of(all);
    const double span = static_cast<double>(c.points - 1) * h;
    const double oracle = grid_crossing_expectation(spec.covariance(h), span, h);
    const json z = z_score(s.mean(), s.standard_error(), oracle);
    r["sweep"].push_back({{"step", h},
                          {"points", c.points},
                          {"mean", s.mean()},
                          {"standard_error", s.standard_error()},
                          {"grid_oracle", oracle},
                          {"z_score", z},
                          {"clipped_fraction", c.clipped_fraction}});
    t.add_row({num(h), num(c.points), num(s.mean()), num(s.standard_error()), num(oracle),
               z.is_null() ? "" : num(z.get<double>())});
    if (s.mean() <= previous) increasing = false;
    previous = s.mean();
    if (s.mean() > 0.0) {
      lx.push_back(std::log(h));
      ly.push_back(std::log(s.mean()));
    }
  }
  r["strictly_increasing"] = increasing;
  if (lx.size() >= 2) {
    const double n = static_cast<double>(lx.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i] / n;
      my += ly[i] / n;
    }
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    r["log_log_slope"] = sxx > 0.0 ? json(sxy / sxx) : json(nullptr);
  } else {
    r["log_log_slope"] = nullptr;
  }
  rep.tables.push_back(std::move(t));
}

void cmd_geman(const ExperimentConfig& cfg, Report& rep) {
  const DirectionalSpectrum spec(cfg.model(), cfg.direction());
  auto& r = rep.results;
  const double delta = cfg.estimator.delta;
  r["lambda2"] = to_json(spec.lambda2());
  r["delta"] = delta;
  r["moment_2_plus_delta"] = to_json(moment_2_plus_delta(cfg.model(), delta));
  r["directional_moment_2_plus_delta"] = to_json(spec.moment_2_plus_delta(delta));
  r["sine_gap_constant"] = fitted_sine_gap_constant(delta);
  const double lambda = spec.finite_lambda2();
  const double a = cfg.estimator.radius;
  r["radius"] = a;
  r["geman_integral"] = to_json(geman_integral(spec, a));

  CsvTable t{"theta", {"tau", "r", "theta", "theta_derivative", "ratio"}, {}};
  constexpr int n = 1000;
  double min_theta = HUGE_VAL;
  double max_ratio = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double tau = 2.0 * a * i / n;
    const LagValues lag = spec.lag(tau);
    const double th = theta(spec, tau);
    const double ratio = lambda > 0.0 ? lag.one_minus_r / (lambda * tau * tau) : 0.0;
    min_theta = std::min(min_theta, th);
    max_ratio = std::max(max_ratio, ratio);
    t.add_row({num(tau), num(lag.r), num(th), num(theta_derivative(spec, tau)), num(ratio)});
  }
  r["theta_min"] = min_theta;
  r["max_one_minus_r_over_lambda2_tau2"] = max_ratio;
  rep.tables.push_back(std::move(t));
}

void cmd_shape_oracle(const ExperimentConfig& cfg, Report& rep) {
  const Shape& shape = cfg.shape();
  LinePlan plan;
  plan.lines = cfg.estimator.lines;
  plan.domain = cfg.domain();
  plan.seed = cfg.run.seed;
  plan.jobs = jobs_of(cfg);
  const double exact = shape_measure(shape);
  const CroftonEstimate est = deterministic_shape_oracle(shape, plan, true);
  auto& r = rep.results;
  r["exact"] = exact;
  r["value"] = est.value;
  r["standard_error"] = est.standard_error;
  r["lines"] = est.n_lines;
  r["z_score"] = z_score(est.value, est.standard_error, exact);
  r["relative_error"] = exact > 0.0 ? json((est.value - exact) / exact) : json(nullptr);
  rep.tables.push_back(line_table(est.records, plan.domain.dimension()));
}

using Command = void (*)(const ExperimentConfig&, Report&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> c{
      {"lambda2", cmd_lambda2},
      {"f-lambda2", cmd_f_lambda2},
      {"expected-volume", cmd_expected_volume},
      {"crossings-1d", cmd_crossings_1d},
      {"second-moment-1d", cmd_second_moment_1d},
      {"crofton", cmd_crofton},
      {"moments", cmd_moments},
      {"diverge", cmd_diverge},
      {"geman", cmd_geman},
      {"shape-oracle", cmd_shape_oracle},
  };
  return c;
}

ReportError classify(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    return {static_cast<int>(ExitCode::config_error), "config_error", x.what()};
  } catch (const GateViolation& x) {
    return {static_cast<int>(ExitCode::gate_violation), "gate_violation", x.what()};
  } catch (const NumericalFailure& x) {
    return {static_cast<int>(ExitCode::numerical_failure), "numerical_failure", x.what()};
  } catch (const std::invalid_argument& x) {
    return {static_cast<int>(ExitCode::config_error), "config_error", x.what()};
  } catch (const std::exception& x) {
    return {static_cast<int>(ExitCode::internal_error), "internal_error", x.what()};
  } catch (...) {
    return {static_cast<int>(ExitCode::internal_error), "internal_error", "unknown exception"};
  }
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"lambda2",  "f-lambda2", "expected-volume", "crossings-1d",
                                              "second-moment-1d", "crofton", "moments", "diverge",
                                              "geman", "shape-oracle"};
  return names;
}

void apply_overrides(ExperimentConfig& config, const RunOverrides& o) {
  if (o.seed) config.run.seed = *o.seed;
  if (o.jobs) config.run.jobs = *o.jobs;
  if (o.out) {
    if (o.out->empty()) throw ConfigError("--out must not be empty");
    config.run.out = *o.out;
  }
  if (o.format) {
    if (*o.format != "json" && *o.format != "csv" && *o.format != "both") {
      throw ConfigError("--format must be json, csv or both");
    }
    config.run.format = *o.format;
  }
}

RunOutcome run_subcommand(const std::string& name, const ExperimentConfig& config) {
  RunOutcome out;
  out.report.subcommand = name;
  out.report.config = config.resolved();
  auto it = commands().find(name);
  if (it == commands().end()) {
    out.exit_code = ExitCode::config_error;
    out.report.error = ReportError{static_cast<int>(out.exit_code), "config_error", "unknown subcommand '" + name + "'"};
    return out;
  }
  try {
    it->second(config, out.report);
  } catch (...) {
    out.report.error = classify(std::current_exception());
    out.exit_code = static_cast<ExitCode>(out.report.error->exit_code);
  }
  return out;
}

int run_from_file(const std::string& name, const std::filesystem::path& config_path, const RunOverrides& overrides,
                  std::ostream& log) {
  ExperimentConfig config;
  try {
    config = ExperimentConfig::load(config_path);
    apply_overrides(config, overrides);
  } catch (...) {
    const ReportError err = classify(std::current_exception());
    log << "levelset " << name << ": " << err.message << '\n';
    if (overrides.out) {
      Report rep;
      rep.subcommand = name;
      rep.config = {{"path", config_path.string()}};
      rep.error = err;
      try {
        write_report(rep, *overrides.out, overrides.format.value_or("json"));
      } catch (const std::exception& e) {
        log << "levelset " << name << ": " << e.what() << '\n';
      }
    }
    return err.exit_code;
  }

  RunOutcome outcome = run_subcommand(name, config);
  try {
    for (const auto& path : write_report(outcome.report, config.run.out, config.run.format)) {
      log << "wrote " << path.string() << '\n';
    }
  } catch (const std::exception& e) {
    log << "levelset " << name << ": " << e.what() << '\n';
    if (outcome.exit_code == ExitCode::ok) return static_cast<int>(ExitCode::internal_error);
  }
  if (outcome.report.error) {
    log << "levelset " << name << ": " << outcome.report.error->kind << ": " << outcome.report.error->message
        << '\n';
  }
  return static_cast<int>(outcome.exit_code);
}

}  // namespace levelset
