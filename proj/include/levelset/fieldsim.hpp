#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "levelset/kacrice.hpp"
#include "levelset/rng.hpp"
#include "levelset/spectral.hpp"

namespace levelset {

/// The field restricted to the line y + t v:
/// X(t) = amplitude * sum_k cos(omega_k t + phase_k).
struct LineHarmonics {
  std::vector<double> omega;
  std::vector<double> phase;
  double amplitude = 1.0;

  double operator()(double t) const;
  /// Values at t0 + j h, j = 0..n-1, by a rotation recurrence that is
  /// re-anchored periodically against drift.
  void evaluate_grid(double t0, double h, std::size_t n, std::vector<double>& out) const;
};

/// One realization X(t) = sqrt(2/M) sum_k cos(<lambda_k, t> + phi_k).
class HarmonicEnsemble {
public:
  /// Frequencies row-major (M x d), phases in [0, 2 pi).
  HarmonicEnsemble(int dimension, std::vector<double> frequencies, std::vector<double> phases,
                   std::uint64_t seed = 0);

  /// Realization `index` of the seeded family of ensembles for `model`.
  static HarmonicEnsemble sample(const SpectralModel& model, std::size_t harmonics, std::uint64_t seed,
                                 std::uint64_t index = 0);

  int dimension() const { return dimension_; }
  std::size_t size() const { return phases_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::span<const double> frequency(std::size_t k) const {
    return {frequencies_.data() + k * dimension_, static_cast<std::size_t>(dimension_)};
  }
  const std::vector<double>& frequencies() const { return frequencies_; }
  const std::vector<double>& phases() const { return phases_; }

  double evaluate(std::span<const double> t) const;
  LineHarmonics restrict_to_line(std::span<const double> y, std::span<const double> v) const;

private:
  int dimension_;
  std::vector<double> frequencies_;
  std::vector<double> phases_;
  std::uint64_t seed_;
};

/// Field samples on a uniform grid along a segment of a line.
struct LineGrid {
  std::vector<double> v;
  std::vector<double> y;
  double t_min = 0.0;
  double t_max = 0.0;
  double step = 0.0;
  std::vector<double> values;

  double t(std::size_t j) const { return t_min + static_cast<double>(j) * step; }
};

/// Number of grid points floor((t_max - t_min)/h) + 1 (tolerant to rounding).
std::size_t grid_points(double length, double h);

LineGrid sample_line_grid(const HarmonicEnsemble& field, std::span<const double> y, std::span<const double> v,
                          double t_min, double t_max, double h);

/// Exact stationary Gaussian samples with covariance r_v(j h), j = 0..n-1,
/// by circulant embedding. Each FFT yields two independent paths.
class CirculantSampler {
public:
  CirculantSampler(const DirectionalSpectrum& spec, double length, double h);
  ~CirculantSampler();
  CirculantSampler(CirculantSampler&&) noexcept;
  CirculantSampler& operator=(CirculantSampler&&) noexcept;

  std::size_t points() const { return n_; }
  std::size_t embedding_size() const { return m_; }
  int doublings() const { return doublings_; }
  /// Most negative eigenvalue of the embedding relative to the largest,
  /// before clipping (0 when the spectrum was nonnegative).
  double clipped_fraction() const { return clipped_; }

  /// Path pair number `index` of stream (seed, stream).
  void sample_pair(std::uint64_t seed, std::uint64_t index, std::vector<double>& first,
                   std::vector<double>& second) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  int doublings_ = 0;
  double clipped_ = 0.0;
};

/// One exact sample of the line process on [0, T] with step h.
LineGrid sample_line_exact(const SpectralModel& model, std::span<const double> v, std::span<const double> y,
                           double length, double h, std::uint64_t seed);

/// Sign changes of (x - u) between consecutive samples. Samples exactly at
/// u count as lying above.
std::size_t count_crossings(std::span<const double> values, double u, CrossingMode mode);

struct RefinedCount {
  std::size_t count = 0;     // all crossings
  std::size_t up = 0;        // up-crossings
  bool flagged = false;      // no stabilization within the halving budget
  int halvings = 0;
  std::vector<double> crossings;  // polished crossing positions
};

/// Halve the grid step from h0 until two consecutive counts agree, then
/// locate each crossing by bisection to 1e-12.
RefinedCount refine_crossings(const LineHarmonics& line, double t_min, double t_max, double u, double h0,
                              int max_halvings = 12);

RefinedCount refine_crossings(const HarmonicEnsemble& field, std::span<const double> v, std::span<const double> y,
                              double t_min, double t_max, double u, double h0);

/// (2 pi / q95) / 20 with q95 the 95th percentile of the spectral radius.
double default_grid_step(const SpectralModel& model);

/// Expected number of sign changes of a stationary Gaussian sequence with
/// lag-one correlation r over (n - 1) = T/h steps.
double grid_crossing_expectation(double r_h, double length, double h);

/// Crossing counts of independent exact line samples on [0, T] with step h.
/// Realization i comes from path pair i / 2 of the seeded sampler, so the
/// counts do not depend on the number of jobs.
struct LineCounts {
  std::vector<std::size_t> all;
  std::vector<std::size_t> up;
  std::size_t points = 0;
  std::size_t embedding_size = 0;
  double clipped_fraction = 0.0;
};

LineCounts simulate_line_counts(const DirectionalSpectrum& spec, double u, double length, double h,
                                std::size_t realizations, std::uint64_t seed, std::size_t jobs = 1);

void write_line_csv(std::ostream& out, const LineGrid& grid);

/// Binary dump of the field on a regular grid over a box; layout in docs/.
void write_grid_dump(std::ostream& out, const HarmonicEnsemble& field, std::span<const double> lower,
                     std::span<const double> upper, std::span<const std::size_t> counts);

}  // namespace levelset
