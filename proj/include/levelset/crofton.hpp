#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "levelset/fieldsim.hpp"
#include "levelset/kacrice.hpp"
#include "levelset/rng.hpp"
#include "levelset/spectral.hpp"

namespace levelset {

/// A line {y + t v} drawn from the motion-invariant line measure restricted
/// to lines meeting the domain, with the importance weight that makes
/// weight * #(B cap line) unbiased for I_{d-1}(B).
struct LineDraw {
  std::vector<double> v;
  std::vector<double> y;  // in v-perp
  double weight = 0.0;
};

/// H_{d-1} of the orthogonal projection of the region onto v-perp.
double shadow_measure(const Region& region, std::span<const double> v);

LineDraw sample_line(const LevelDomain& domain, CounterRng& rng);

/// Parameter interval of the chord of the region along the line, or nothing
/// when the line misses it (tangent lines count as missing).
std::optional<std::pair<double, double>> segment_in_domain(const LevelDomain& domain, std::span<const double> v,
                                                           std::span<const double> y);

struct LinePlan {
  std::size_t lines = 1000;
  LevelDomain domain;
  std::uint64_t seed = 0;
  bool refinement = true;
  /// Initial grid step along lines; 0 selects default_grid_step(model).
  double step = 0.0;
  std::size_t jobs = 1;
};

struct LineRecord {
  std::vector<double> v;
  std::vector<double> y;
  double t_min = 0.0;
  double t_max = 0.0;
  std::size_t count = 0;
  double weight = 0.0;
  bool flagged = false;
};

struct CroftonEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t n_lines = 0;
  std::size_t n_flagged = 0;
  std::vector<std::size_t> counts;  // per line, flagged lines included
  std::vector<LineRecord> records;  // filled on request
};

/// Crofton estimate of the (d-1)-volume of {X = u} in the plan's domain for
/// one realization. `realization` selects independent line streams.
CroftonEstimate crofton_estimate(const HarmonicEnsemble& field, double u, const LinePlan& plan,
                                 std::uint64_t realization = 0, bool keep_records = false);

struct SphereShape {
  std::vector<double> center;
  double radius = 1.0;
};

/// Flat (d-1)-disc through `point` with unit `normal`.
struct HyperplanePatch {
  std::vector<double> point;
  std::vector<double> normal;
  double radius = 1.0;
};

/// Finite point set on the real line (d = 1).
struct PointSet {
  std::vector<double> points;
};

using Shape = std::variant<SphereShape, HyperplanePatch, PointSet>;

/// H_{d-1}(shape).
double shape_measure(const Shape& shape);

/// Number of points of the shape on the chord {y + t v : t in [t_min, t_max]}.
std::size_t shape_intersections(const Shape& shape, std::span<const double> v, std::span<const double> y,
                                double t_min, double t_max);

/// Crofton estimate with exact line-shape intersection counts.
CroftonEstimate deterministic_shape_oracle(const Shape& shape, const LinePlan& plan, bool keep_records = false);

struct MomentPlan {
  std::size_t realizations = 30;
  std::size_t harmonics = 512;
  int max_order = 4;
  std::size_t bootstrap = 1000;
  /// Relative change allowed between the first half and all realizations.
  double stability_threshold = 0.2;
};

struct MomentEstimate {
  int order = 1;
  double value = 0.0;  // sample mean of I^order
  double ci_low = 0.0;
  double ci_high = 0.0;
  double half_value = 0.0;  // same statistic over the first half
  double relative_change = 0.0;
  bool finite = true;
  bool stable = true;
};

struct MomentReport {
  std::vector<double> values;  // per realization
  std::vector<double> standard_errors;
  std::size_t total_lines = 0;
  std::size_t flagged_lines = 0;
  double mean = 0.0;
  double standard_error = 0.0;  // across realizations
  std::vector<MomentEstimate> moments;
};

/// Moments of the Crofton estimate across independent realizations of the
/// field. Throws GateViolation when Lambda_2 is not finite.
MomentReport estimate_moments(const SpectralModel& model, double u, const LinePlan& plan, const MomentPlan& moments);

}  // namespace levelset
