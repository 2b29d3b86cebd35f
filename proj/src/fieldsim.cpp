#include "levelset/fieldsim.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "levelset/csv.hpp"
#include "levelset/errors.hpp"
#include "levelset/parallel.hpp"

namespace levelset {

namespace {

constexpr std::size_t kReanchor = 64;
constexpr double kMaxGridPoints = 1e7;

// FFTW planning is not thread-safe; execution with new arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

bool above(double x, double u) { return x >= u; }

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

}  // namespace

// ---------------------------------------------------------------- LineHarmonics

double LineHarmonics::operator()(double t) const {
  double s = 0.0;
  for (std::size_t k = 0; k < omega.size(); ++k) s += std::cos(omega[k] * t + phase[k]);
  return amplitude * s;
}

void LineHarmonics::evaluate_grid(double t0, double h, std::size_t n, std::vector<double>& out) const {
  out.assign(n, 0.0);
  for (std::size_t k = 0; k < omega.size(); ++k) {
    const std::complex<double> rot = std::polar(1.0, omega[k] * h);
    std::complex<double> z;
    for (std::size_t j = 0; j < n; ++j) {
      if (j % kReanchor == 0) z = std::polar(1.0, omega[k] * (t0 + static_cast<double>(j) * h) + phase[k]);
      out[j] += z.real();
      z *= rot;
    }
  }
  for (double& x : out) x *= amplitude;
}

// ---------------------------------------------------------------- HarmonicEnsemble

HarmonicEnsemble::HarmonicEnsemble(int dimension, std::vector<double> frequencies, std::vector<double> phases,
                                   std::uint64_t seed)
    : dimension_(dimension), frequencies_(std::move(frequencies)), phases_(std::move(phases)), seed_(seed) {
  if (dimension_ < 1) throw std::invalid_argument("HarmonicEnsemble: dimension must be positive");
  if (phases_.empty()) throw std::invalid_argument("HarmonicEnsemble: at least one harmonic required");
  if (frequencies_.size() != phases_.size() * static_cast<std::size_t>(dimension_)) {
    throw std::invalid_argument("HarmonicEnsemble: frequency array has the wrong size");
  }
}

HarmonicEnsemble HarmonicEnsemble::sample(const SpectralModel& model, std::size_t harmonics, std::uint64_t seed,
                                          std::uint64_t index) {
  if (harmonics < 1) throw std::invalid_argument("HarmonicEnsemble: at least one harmonic required");
  const int d = model.dimension();
  CounterRng rng(seed, derive_stream(StreamTag::ensemble, index));
  std::vector<double> freq(harmonics * d);
  std::vector<double> phases(harmonics);
  for (std::size_t k = 0; k < harmonics; ++k) {
    model.sample_frequency(rng, std::span<double>(freq.data() + k * d, d));
    phases[k] = 2.0 * std::numbers::pi * rng.uniform();
  }
  return HarmonicEnsemble(d, std::move(freq), std::move(phases), seed);
}

double HarmonicEnsemble::evaluate(std::span<const double> t) const {
  if (static_cast<int>(t.size()) != dimension_) throw std::invalid_argument("evaluate: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < size(); ++k) s += std::cos(dot(frequency(k), t) + phases_[k]);
  return std::sqrt(2.0 / static_cast<double>(size())) * s;
}

LineHarmonics HarmonicEnsemble::restrict_to_line(std::span<const double> y, std::span<const double> v) const {
  if (static_cast<int>(y.size()) != dimension_ || static_cast<int>(v.size()) != dimension_) {
    throw std::invalid_argument("restrict_to_line: dimension mismatch");
  }
  LineHarmonics line;
  line.amplitude = std::sqrt(2.0 / static_cast<double>(size()));
  line.omega.resize(size());
  line.phase.resize(size());
  for (std::size_t k = 0; k < size(); ++k) {
    line.omega[k] = dot(frequency(k), v);
    line.phase[k] = dot(frequency(k), y) + phases_[k];
  }
  return line;
}

// ---------------------------------------------------------------- grids

std::size_t grid_points(double length, double h) {
  if (!(h > 0.0) || !(length >= 0.0)) throw std::invalid_argument("grid_points: need h > 0 and length >= 0");
  const double intervals = std::floor(length / h + 1e-9);
  if (intervals + 1.0 > kMaxGridPoints) throw std::invalid_argument("grid_points: more than 1e7 grid points");
  return static_cast<std::size_t>(intervals) + 1;
}

LineGrid sample_line_grid(const HarmonicEnsemble& field, std::span<const double> y, std::span<const double> v,
                          double t_min, double t_max, double h) {
  LineGrid grid;
  grid.v.assign(v.begin(), v.end());
  grid.y.assign(y.begin(), y.end());
  grid.t_min = t_min;
  grid.t_max = t_max;
  grid.step = h;
  field.restrict_to_line(y, v).evaluate_grid(t_min, h, grid_points(t_max - t_min, h), grid.values);
  return grid;
}

// ---------------------------------------------------------------- circulant embedding

struct CirculantSampler::Impl {
  std::vector<double> scale;  // sqrt(eigenvalue / m)
  fftw_plan plan = nullptr;

  ~Impl() {
    if (plan != nullptr) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

CirculantSampler::CirculantSampler(const DirectionalSpectrum& spec, double length, double h)
    : impl_(std::make_unique<Impl>()) {
  if (!(h > 0.0) || !(length >= 0.0)) throw std::invalid_argument("CirculantSampler: need h > 0 and T >= 0");
  n_ = grid_points(length, h);
  if (n_ == 1) {
    m_ = 1;
    impl_->scale = {1.0};
    return;
  }
  m_ = std::bit_ceil(2 * (n_ - 1));
  for (doublings_ = 0;; ++doublings_) {
    std::vector<std::complex<double>> row(m_);
    for (std::size_t j = 0; j <= m_ / 2; ++j) {
      const double r = spec.covariance(static_cast<double>(j) * h);
      row[j] = r;
      if (j > 0 && j < m_ / 2) row[m_ - j] = r;
    }
    {
      std::lock_guard lock(fftw_planner_mutex());
      auto* data = reinterpret_cast<fftw_complex*>(row.data());
      fftw_plan p = fftw_plan_dft_1d(static_cast<int>(m_), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
      fftw_execute(p);
      fftw_destroy_plan(p);
    }
    double top = 0.0;
    double bottom = 0.0;
    for (const auto& c : row) {
      top = std::max(top, c.real());
      bottom = std::min(bottom, c.real());
    }
    if (bottom >= -1e-10 * top) {
      clipped_ = top > 0.0 ? -bottom / top : 0.0;
      impl_->scale.resize(m_);
      for (std::size_t k = 0; k < m_; ++k) {
        impl_->scale[k] = std::sqrt(std::max(0.0, row[k].real()) / static_cast<double>(m_));
      }
      break;
    }
    if (doublings_ == 8) {
      throw NumericalFailure("circulant embedding has a negative spectrum after 8 doublings");
    }
    m_ *= 2;
  }
  std::vector<std::complex<double>> scratch(m_);
  std::lock_guard lock(fftw_planner_mutex());
  auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
  impl_->plan = fftw_plan_dft_1d(static_cast<int>(m_), data, data, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
}

CirculantSampler::~CirculantSampler() = default;
CirculantSampler::CirculantSampler(CirculantSampler&&) noexcept = default;
CirculantSampler& CirculantSampler::operator=(CirculantSampler&&) noexcept = default;

void CirculantSampler::sample_pair(std::uint64_t seed, std::uint64_t index, std::vector<double>& first,
                                   std::vector<double>& second) const {
  CounterRng rng(seed, derive_stream(StreamTag::line_sample, index));
  first.resize(n_);
  second.resize(n_);
  if (n_ == 1) {
    first[0] = rng.normal();
    second[0] = rng.normal();
    return;
  }
  std::vector<std::complex<double>> buf(m_);
  for (std::size_t k = 0; k < m_; ++k) {
    const double re = rng.normal();
    const double im = rng.normal();
    buf[k] = impl_->scale[k] * std::complex<double>(re, im);
  }
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(impl_->plan, data, data);
  for (std::size_t j = 0; j < n_; ++j) {
    first[j] = buf[j].real();
    second[j] = buf[j].imag();
  }
}

LineGrid sample_line_exact(const SpectralModel& model, std::span<const double> v, std::span<const double> y,
                           double length, double h, std::uint64_t seed) {
  if (!(h > 0.0)) throw std::invalid_argument("sample_line_exact: h must be positive");
  if (!(length >= 0.0)) throw std::invalid_argument("sample_line_exact: T must be nonnegative");
  if (length / h > kMaxGridPoints) throw std::invalid_argument("sample_line_exact: T/h exceeds 1e7");
  const DirectionalSpectrum spec(model, std::vector<double>(v.begin(), v.end()));
  const CirculantSampler sampler(spec, length, h);
  LineGrid grid;
  grid.v.assign(v.begin(), v.end());
  grid.y.assign(y.begin(), y.end());
  grid.t_min = 0.0;
  grid.t_max = length;
  grid.step = h;
  std::vector<double> unused;
  sampler.sample_pair(seed, 0, grid.values, unused);
  return grid;
}

// ---------------------------------------------------------------- counting

std::size_t count_crossings(std::span<const double> values, double u, CrossingMode mode) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const bool a = above(values[i], u);
    const bool b = above(values[i + 1], u);
    if (mode == CrossingMode::all ? a != b : (!a && b)) ++count;
  }
  return count;
}

RefinedCount refine_crossings(const LineHarmonics& line, double t_min, double t_max, double u, double h0,
                              int max_halvings) {
  if (!(h0 > 0.0)) throw std::invalid_argument("refine_crossings: h0 must be positive");
  RefinedCount out;
  const double length = t_max - t_min;
  if (!(length > 0.0)) return out;

  auto intervals = static_cast<std::size_t>(std::max(1.0, std::ceil(length / h0 - 1e-9)));
  std::vector<double> values;
  auto count_at = [&](std::size_t k) {
    line.evaluate_grid(t_min, length / static_cast<double>(k), k + 1, values);
    values.back() = line(t_max);
    return count_crossings(values, u, CrossingMode::all);
  };
  std::size_t previous = count_at(intervals);
  out.flagged = true;
  for (int level = 1; level <= max_halvings; ++level) {
    intervals *= 2;
    const std::size_t current = count_at(intervals);
    out.halvings = level;
    if (current == previous) {
      out.flagged = false;
      break;
    }
    previous = current;
  }

  const double h = length / static_cast<double>(intervals);
  out.count = count_crossings(values, u, CrossingMode::all);
  out.up = count_crossings(values, u, CrossingMode::up);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const bool a_above = above(values[i], u);
    if (a_above == above(values[i + 1], u)) continue;
    double lo = t_min + static_cast<double>(i) * h;
    double hi = i + 2 == values.size() ? t_max : lo + h;
    while (hi - lo > 1e-12) {
      const double mid = 0.5 * (lo + hi);
      if (above(line(mid), u) == a_above) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out.crossings.push_back(0.5 * (lo + hi));
  }
  return out;
}

RefinedCount refine_crossings(const HarmonicEnsemble& field, std::span<const double> v, std::span<const double> y,
                              double t_min, double t_max, double u, double h0) {
  return refine_crossings(field.restrict_to_line(y, v), t_min, t_max, u, h0);
}

double default_grid_step(const SpectralModel& model) {
  return 2.0 * std::numbers::pi / model.spectral_radius_quantile(0.95) / 20.0;
}

double grid_crossing_expectation(double r_h, double length, double h) {
  return length / h * std::acos(std::clamp(r_h, -1.0, 1.0)) / std::numbers::pi;
}

LineCounts simulate_line_counts(const DirectionalSpectrum& spec, double u, double length, double h,
                                std::size_t realizations, std::uint64_t seed, std::size_t jobs) {
  const CirculantSampler sampler(spec, length, h);
  LineCounts out;
  out.all.resize(realizations);
  out.up.resize(realizations);
  out.points = sampler.points();
  out.embedding_size = sampler.embedding_size();
  out.clipped_fraction = sampler.clipped_fraction();
  const std::size_t pairs = (realizations + 1) / 2;
  parallel_for(pairs, jobs, [&](std::size_t p) {
    std::vector<double> a;
    std::vector<double> b;
    sampler.sample_pair(seed, p, a, b);
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t i = 2 * p + k;
      if (i >= realizations) break;
      const auto& x = k == 0 ? a : b;
      out.all[i] = count_crossings(x, u, CrossingMode::all);
      out.up[i] = count_crossings(x, u, CrossingMode::up);
    }
  });
  return out;
}

// ---------------------------------------------------------------- export

void write_line_csv(std::ostream& out, const LineGrid& grid) {
  CsvWriter csv(out);
  csv.field("t").field("x").end_row();
  for (std::size_t j = 0; j < grid.values.size(); ++j) {
    csv.field(grid.t(j)).field(grid.values[j]).end_row();
  }
}

void write_grid_dump(std::ostream& out, const HarmonicEnsemble& field, std::span<const double> lower,
                     std::span<const double> upper, std::span<const std::size_t> counts) {
  const auto d = static_cast<std::size_t>(field.dimension());
  if (lower.size() != d || upper.size() != d || counts.size() != d) {
    throw std::invalid_argument("write_grid_dump: dimension mismatch");
  }
  std::size_t total = 1;
  for (std::size_t c : counts) {
    if (c == 0) throw std::invalid_argument("write_grid_dump: zero grid count");
    total *= c;
  }
  out.write("LSGRID01", 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(field.size()));
  put<std::uint64_t>(out, field.seed());
  for (double x : lower) put<double>(out, x);
  for (double x : upper) put<double>(out, x);
  for (std::size_t c : counts) put<std::uint64_t>(out, static_cast<std::uint64_t>(c));

  std::vector<std::size_t> index(d, 0);
  std::vector<double> point(d);
  for (std::size_t flat = 0; flat < total; ++flat) {
    for (std::size_t i = 0; i < d; ++i) {
      const double frac = counts[i] > 1 ? static_cast<double>(index[i]) / static_cast<double>(counts[i] - 1) : 0.0;
      point[i] = lower[i] + frac * (upper[i] - lower[i]);
    }
    put<double>(out, field.evaluate(point));
    // Last axis varies fastest.
    for (std::size_t i = d; i-- > 0;) {
      if (++index[i] < counts[i]) break;
      index[i] = 0;
    }
  }
}

}  // namespace levelset
