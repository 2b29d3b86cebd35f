#include "levelset/crofton.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "levelset/errors.hpp"
#include "levelset/parallel.hpp"
#include "levelset/sphere_quadrature.hpp"

namespace levelset {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> uniform_direction(int d, CounterRng& rng) {
  std::vector<double> v(d);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

// Uniform point of the (d-1)-ball of given radius inside v-perp.
std::vector<double> uniform_in_perp_ball(std::span<const double> v, double radius, CounterRng& rng) {
  const auto d = static_cast<int>(v.size());
  std::vector<double> y(d, 0.0);
  if (d == 1) return y;
  double n2 = 0.0;
  do {
    for (double& x : y) x = rng.normal();
    const double along = dot(y, v);
    n2 = 0.0;
    for (int i = 0; i < d; ++i) {
      y[i] -= along * v[i];
      n2 += y[i] * y[i];
    }
  } while (n2 == 0.0);
  const double rho = radius * std::pow(rng.uniform(), 1.0 / (d - 1));
  const double f = rho / std::sqrt(n2);
  for (double& x : y) x *= f;
  return y;
}

// Per-face shadow contributions |v_i| prod_{j != i} L_j.
std::vector<double> face_shadows(const Box& box, std::span<const double> v) {
  const std::size_t d = box.lower.size();
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double area = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (j != i) area *= box.upper[j] - box.lower[j];
    }
    out[i] = std::abs(v[i]) * area;
  }
  return out;
}

double line_weight(int d, double shadow) { return crofton_constant(d) * sphere_area(d) * shadow; }

// Grid step from the ensemble's own frequencies: 20 points per wavelength
// at the 95th percentile of |lambda_k|.
double ensemble_grid_step(const HarmonicEnsemble& field) {
  std::vector<double> radii(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) {
    const auto f = field.frequency(k);
    radii[k] = std::sqrt(dot(f, f));
  }
  const std::size_t at = std::min(radii.size() - 1, static_cast<std::size_t>(0.95 * static_cast<double>(radii.size())));
  std::nth_element(radii.begin(), radii.begin() + static_cast<std::ptrdiff_t>(at), radii.end());
  const double q = radii[at];
  return q > 0.0 ? 2.0 * std::numbers::pi / q / 20.0 : 1.0;
}

std::size_t count_on_segment(const LineHarmonics& line, double t_min, double t_max, double u, double h,
                             bool refinement, bool& flagged) {
  flagged = false;
  if (refinement) {
    const RefinedCount rc = refine_crossings(line, t_min, t_max, u, h);
    flagged = rc.flagged;
    return rc.count;
  }
  const double length = t_max - t_min;
  const auto intervals = static_cast<std::size_t>(std::max(1.0, std::ceil(length / h - 1e-9)));
  std::vector<double> values;
  line.evaluate_grid(t_min, length / static_cast<double>(intervals), intervals + 1, values);
  values.back() = line(t_max);
  return count_crossings(values, u, CrossingMode::all);
}

template <class CountFn>
CroftonEstimate run_lines(const LinePlan& plan, std::uint64_t realization, bool keep_records, CountFn&& count_fn) {
  if (plan.lines < 1) throw std::invalid_argument("LinePlan: at least one line required");
  plan.domain.validate();
  const std::size_t n = plan.lines;
  std::vector<LineRecord> records(n);
  parallel_for(n, plan.jobs, [&](std::size_t i) {
    CounterRng rng(plan.seed, derive_stream(StreamTag::lines, realization, i));
    LineDraw draw = sample_line(plan.domain, rng);
    LineRecord& rec = records[i];
    rec.weight = draw.weight;
    if (const auto seg = segment_in_domain(plan.domain, draw.v, draw.y)) {
      rec.t_min = seg->first;
      rec.t_max = seg->second;
      rec.count = count_fn(draw.v, draw.y, rec.t_min, rec.t_max, rec.flagged);
    }
    rec.v = std::move(draw.v);
    rec.y = std::move(draw.y);
  });

  CroftonEstimate est;
  est.n_lines = n;
  RunningStats stats;
  est.counts.reserve(n);
  for (const auto& rec : records) {
    est.counts.push_back(rec.count);
    if (rec.flagged) {
      ++est.n_flagged;
      continue;
    }
    stats.add(rec.weight * static_cast<double>(rec.count));
  }
  if (stats.count() == 0) throw NumericalFailure("crofton: every line was flagged");
  est.value = std::max(0.0, stats.mean());
  est.standard_error = stats.standard_error();
  if (keep_records) est.records = std::move(records);
  return est;
}

}  // namespace

// ---------------------------------------------------------------- line sampling

double shadow_measure(const Region& region, std::span<const double> v) {
  return std::visit(Overloaded{
                        [](const Ball& b) {
                          const int d = static_cast<int>(b.center.size());
                          if (d == 1) return 1.0;
                          return unit_ball_volume(d - 1) * std::pow(b.radius, d - 1);
                        },
                        [&](const Box& b) {
                          const auto faces = face_shadows(b, v);
                          return std::accumulate(faces.begin(), faces.end(), 0.0);
                        },
                    },
                    region);
}

LineDraw sample_line(const LevelDomain& domain, CounterRng& rng) {
  const int d = domain.dimension();
  LineDraw draw;
  draw.v = uniform_direction(d, rng);
  std::visit(Overloaded{
                 [&](const Ball& b) {
                   draw.y = uniform_in_perp_ball(draw.v, b.radius, rng);
                   // Shift the center into v-perp.
                   const double along = dot(b.center, draw.v);
                   for (int i = 0; i < d; ++i) draw.y[i] += b.center[i] - along * draw.v[i];
                 },
                 [&](const Box& b) {
                   const auto faces = face_shadows(b, draw.v);
                   const double total = std::accumulate(faces.begin(), faces.end(), 0.0);
                   const double pick = rng.uniform() * total;
                   std::size_t face = faces.size() - 1;
                   double acc = 0.0;
                   for (std::size_t i = 0; i < faces.size(); ++i) {
                     acc += faces[i];
                     if (pick < acc) {
                       face = i;
                       break;
                     }
                   }
                   // Uniform point on the entry face, projected along v.
                   std::vector<double> x(d);
                   for (int i = 0; i < d; ++i) {
                     if (static_cast<std::size_t>(i) == face) {
                       x[i] = draw.v[i] >= 0.0 ? b.lower[i] : b.upper[i];
                     } else {
                       x[i] = b.lower[i] + rng.uniform() * (b.upper[i] - b.lower[i]);
                     }
                   }
                   const double along = dot(x, draw.v);
                   draw.y.resize(d);
                   for (int i = 0; i < d; ++i) draw.y[i] = x[i] - along * draw.v[i];
                 },
             },
             domain.region);
  draw.weight = line_weight(d, shadow_measure(domain.region, draw.v));
  return draw;
}

std::optional<std::pair<double, double>> segment_in_domain(const LevelDomain& domain, std::span<const double> v,
                                                           std::span<const double> y) {
  const int d = domain.dimension();
  if (static_cast<int>(v.size()) != d || static_cast<int>(y.size()) != d) {
    throw std::invalid_argument("segment_in_domain: dimension mismatch");
  }
  if (std::abs(std::sqrt(dot(v, v)) - 1.0) > 1e-12) {
    throw std::invalid_argument("segment_in_domain: direction must be a unit vector");
  }
  return std::visit(
      Overloaded{
          [&](const Ball& b) -> std::optional<std::pair<double, double>> {
            double wv = 0.0;
            double ww = 0.0;
            for (int i = 0; i < d; ++i) {
              const double w = y[i] - b.center[i];
              wv += w * v[i];
              ww += w * w;
            }
            const double disc = wv * wv - (ww - b.radius * b.radius);
            if (!(disc > 0.0)) return std::nullopt;
            const double root = std::sqrt(disc);
            return std::pair{-wv - root, -wv + root};
          },
          [&](const Box& b) -> std::optional<std::pair<double, double>> {
            double lo = -HUGE_VAL;
            double hi = HUGE_VAL;
            for (int i = 0; i < d; ++i) {
              if (v[i] == 0.0) {
                if (y[i] < b.lower[i] || y[i] > b.upper[i]) return std::nullopt;
                continue;
              }
              double t1 = (b.lower[i] - y[i]) / v[i];
              double t2 = (b.upper[i] - y[i]) / v[i];
              if (t1 > t2) std::swap(t1, t2);
              lo = std::max(lo, t1);
              hi = std::min(hi, t2);
            }
            if (!(hi > lo)) return std::nullopt;
            return std::pair{lo, hi};
          },
      },
      domain.region);
}

// ---------------------------------------------------------------- estimators

CroftonEstimate crofton_estimate(const HarmonicEnsemble& field, double u, const LinePlan& plan,
                                 std::uint64_t realization, bool keep_records) {
  if (field.dimension() != plan.domain.dimension()) {
    throw std::invalid_argument("crofton_estimate: field and domain dimensions differ");
  }
  const double h = plan.step > 0.0 ? plan.step : ensemble_grid_step(field);
  return run_lines(plan, realization, keep_records,
                   [&](const std::vector<double>& v, const std::vector<double>& y, double t0, double t1,
                       bool& flagged) {
                     return count_on_segment(field.restrict_to_line(y, v), t0, t1, u, h, plan.refinement, flagged);
                   });
}

double shape_measure(const Shape& shape) {
  return std::visit(Overloaded{
                        [](const SphereShape& s) {
                          const int d = static_cast<int>(s.center.size());
                          if (d == 1) return s.radius > 0.0 ? 2.0 : 1.0;
                          return sphere_area(d) * std::pow(s.radius, d - 1);
                        },
                        [](const HyperplanePatch& p) {
                          const int d = static_cast<int>(p.point.size());
                          if (d == 1) return 1.0;
                          return unit_ball_volume(d - 1) * std::pow(p.radius, d - 1);
                        },
                        [](const PointSet& p) { return static_cast<double>(p.points.size()); },
                    },
                    shape);
}

std::size_t shape_intersections(const Shape& shape, std::span<const double> v, std::span<const double> y,
                                double t_min, double t_max) {
  auto inside = [&](double t) { return t >= t_min && t <= t_max; };
  return std::visit(
      Overloaded{
          [&](const SphereShape& s) -> std::size_t {
            double wv = 0.0;
            double ww = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
              const double w = y[i] - s.center[i];
              wv += w * v[i];
              ww += w * w;
            }
            const double disc = wv * wv - (ww - s.radius * s.radius);
            if (!(disc > 0.0)) return 0;
            const double root = std::sqrt(disc);
            return static_cast<std::size_t>(inside(-wv - root)) + static_cast<std::size_t>(inside(-wv + root));
          },
          [&](const HyperplanePatch& p) -> std::size_t {
            const double vn = dot(v, p.normal);
            if (vn == 0.0) return 0;
            double offset = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) offset += (p.point[i] - y[i]) * p.normal[i];
            const double t = offset / vn;
            if (!inside(t)) return 0;
            double dist2 = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
              const double x = y[i] + t * v[i] - p.point[i];
              dist2 += x * x;
            }
            return dist2 <= p.radius * p.radius ? 1 : 0;
          },
          [&](const PointSet& p) -> std::size_t {
            if (v.size() != 1) throw std::invalid_argument("PointSet shapes live in dimension 1");
            std::size_t hits = 0;
            for (double x : p.points) hits += inside((x - y[0]) / v[0]) ? 1 : 0;
            return hits;
          },
      },
      shape);
}

CroftonEstimate deterministic_shape_oracle(const Shape& shape, const LinePlan& plan, bool keep_records) {
  return run_lines(plan, 0, keep_records,
                   [&](const std::vector<double>& v, const std::vector<double>& y, double t0, double t1, bool&) {
                     return shape_intersections(shape, v, y, t0, t1);
                   });
}

MomentReport estimate_moments(const SpectralModel& model, double u, const LinePlan& plan, const MomentPlan& mp) {
  if (!lambda2_matrix(model).finite) {
    throw GateViolation("moment estimation requires a finite second spectral moment matrix");
  }
  if (mp.realizations < 30) throw std::invalid_argument("estimate_moments: at least 30 realizations required");
  if (mp.max_order < 1) throw std::invalid_argument("estimate_moments: max_order must be positive");
  if (model.dimension() != plan.domain.dimension()) {
    throw std::invalid_argument("estimate_moments: model and domain dimensions differ");
  }

  const std::size_t n = mp.realizations;
  MomentReport report;
  report.values.resize(n);
  report.standard_errors.resize(n);
  std::vector<std::size_t> flagged(n);
  LinePlan inner = plan;
  inner.jobs = 1;
  if (inner.step <= 0.0) inner.step = default_grid_step(model);
  parallel_for(n, plan.jobs, [&](std::size_t r) {
    const HarmonicEnsemble field = HarmonicEnsemble::sample(model, mp.harmonics, plan.seed, r);
    const CroftonEstimate est = crofton_estimate(field, u, inner, r);
    report.values[r] = est.value;
    report.standard_errors[r] = est.standard_error;
    flagged[r] = est.n_flagged;
  });
  report.total_lines = n * plan.lines;
  report.flagged_lines = std::accumulate(flagged.begin(), flagged.end(), std::size_t{0});

  RunningStats across;
  for (double x : report.values) across.add(x);
  report.mean = across.mean();
  report.standard_error = across.standard_error();

  auto raw_moment = [](std::span<const double> xs, int order) {
    double s = 0.0;
    for (double x : xs) s += std::pow(x, order);
    return s / static_cast<double>(xs.size());
  };

  const auto orders = static_cast<std::size_t>(mp.max_order);
  std::vector<std::vector<double>> boot(orders);
  if (mp.bootstrap > 0) {
    CounterRng rng(plan.seed, derive_stream(StreamTag::bootstrap));
    std::vector<double> sample(n);
    for (std::size_t b = 0; b < mp.bootstrap; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto pick = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
        sample[i] = report.values[pick];
      }
      for (std::size_t m = 0; m < orders; ++m) boot[m].push_back(raw_moment(sample, static_cast<int>(m + 1)));
    }
  }

  const std::span<const double> all(report.values);
  const std::span<const double> half = all.first(n / 2);
  for (std::size_t m = 0; m < orders; ++m) {
    MomentEstimate e;
    e.order = static_cast<int>(m + 1);
    e.value = raw_moment(all, e.order);
    e.half_value = raw_moment(half, e.order);
    e.relative_change = e.value != 0.0 ? std::abs(e.value - e.half_value) / std::abs(e.value) : 0.0;
    e.finite = std::isfinite(e.value);
    e.stable = e.finite && e.relative_change < mp.stability_threshold;
    if (!boot[m].empty()) {
      auto& bs = boot[m];
      std::sort(bs.begin(), bs.end());
      const auto lo = static_cast<std::size_t>(std::floor(0.025 * static_cast<double>(bs.size())));
      const auto hi = std::min(bs.size() - 1, static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(bs.size()))) - 1);
      e.ci_low = bs[lo];
      e.ci_high = bs[hi];
    } else {
      e.ci_low = e.ci_high = e.value;
    }
    report.moments.push_back(e);
  }
  return report;
}

}  // namespace levelset
