#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <vector>

#include "levelset/fieldsim.hpp"
#include "levelset/parallel.hpp"

using namespace levelset;

namespace {

constexpr double pi = std::numbers::pi;

template <class T>
T take(std::istream& in) {
  T x{};
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  return x;
}

}  // namespace

TEST_CASE("grid evaluation matches direct evaluation") {
  LineHarmonics line{{0.3, 1.7, 5.2, 11.0}, {0.1, 2.0, 4.0, 5.5}, 0.7};
  std::vector<double> values;
  const double h = 1e-3;
  line.evaluate_grid(-2.0, h, 20001, values);
  REQUIRE(values.size() == 20001);
  double worst = 0.0;
  for (std::size_t j = 0; j < values.size(); j += 37) {
    worst = std::max(worst, std::abs(values[j] - line(-2.0 + static_cast<double>(j) * h)));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("ensemble restriction to a line is consistent") {
  const auto model = SpectralModel::isotropic_gaussian(3, 1.2);
  const auto field = HarmonicEnsemble::sample(model, 64, 5, 2);
  CHECK(field.size() == 64);
  CHECK(field.dimension() == 3);
  const std::vector<double> y{0.2, -0.4, 1.0};
  const std::vector<double> v{0.6, 0.0, 0.8};
  const LineHarmonics line = field.restrict_to_line(y, v);
  for (double t : {-3.0, 0.0, 0.5, 7.0}) {
    std::vector<double> p(3);
    for (int i = 0; i < 3; ++i) p[i] = y[i] + t * v[i];
    CHECK(line(t) == doctest::Approx(field.evaluate(p)).epsilon(1e-12));
  }
  // Reproducible by (seed, index), distinct across indices.
  const auto again = HarmonicEnsemble::sample(model, 64, 5, 2);
  const auto other = HarmonicEnsemble::sample(model, 64, 5, 3);
  CHECK(again.phases() == field.phases());
  CHECK(again.frequencies() == field.frequencies());
  CHECK(other.phases() != field.phases());
}

TEST_CASE("ensemble covariance across realizations") {
  const auto model = SpectralModel::isotropic_gaussian(2, 1.0);
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{0.6, 0.3};
  RunningStats prod;
  RunningStats sq;
  for (std::uint64_t i = 0; i < 4000; ++i) {
    const auto f = HarmonicEnsemble::sample(model, 32, 1, i);
    const double xa = f.evaluate(a);
    prod.add(xa * f.evaluate(b));
    sq.add(xa * xa);
  }
  CHECK(std::abs(sq.mean() - 1.0) < 5.0 * sq.standard_error());
  CHECK(std::abs(prod.mean() - std::exp(-0.45 / 2.0)) < 5.0 * prod.standard_error());
}

TEST_CASE("grid points") {
  CHECK(grid_points(1.0, 0.1) == 11);
  CHECK(grid_points(1.0, 0.3) == 4);
  CHECK(grid_points(0.0, 0.1) == 1);
  CHECK_THROWS_AS(grid_points(1.0, 1e-8), std::invalid_argument);
}

TEST_CASE("circulant embedding reproduces the covariance") {
  const DirectionalSpectrum spec(SpectralModel::isotropic_gaussian(1, 1.0), {1.0});
  const double h = 0.05;
  const CirculantSampler sampler(spec, 5.0, h);
  CHECK(sampler.points() == 101);
  CHECK(sampler.embedding_size() >= 200);
  CHECK(std::abs(sampler.clipped_fraction()) < 1e-8);
  const std::vector<std::size_t> lags{0, 1, 10, 30};
  std::vector<RunningStats> stats(lags.size());
  std::vector<double> x;
  std::vector<double> y;
  for (std::uint64_t p = 0; p < 5000; ++p) {
    sampler.sample_pair(3, p, x, y);
    for (std::size_t k = 0; k < lags.size(); ++k) {
      stats[k].add(x[20] * x[20 + lags[k]]);
      stats[k].add(y[50] * y[50 + lags[k]]);
    }
  }
  for (std::size_t k = 0; k < lags.size(); ++k) {
    const double expected = spec.covariance(static_cast<double>(lags[k]) * h);
    CHECK(std::abs(stats[k].mean() - expected) < 5.0 * stats[k].standard_error());
  }
  // The two halves of a pair are uncorrelated.
  RunningStats cross;
  for (std::uint64_t p = 0; p < 5000; ++p) {
    sampler.sample_pair(4, p, x, y);
    cross.add(x[10] * y[10]);
  }
  CHECK(std::abs(cross.mean()) < 5.0 * cross.standard_error());
}

TEST_CASE("rough kernels embed without clipping") {
  const DirectionalSpectrum ou(SpectralModel::ornstein_uhlenbeck(1, 1.0), {1.0});
  const CirculantSampler s(ou, 1.0, 1e-3);
  CHECK(s.clipped_fraction() == 0.0);
  const LineGrid g = sample_line_exact(SpectralModel::ornstein_uhlenbeck(2, 1.0), std::vector<double>{1.0, 0.0},
                                       std::vector<double>{0.0, 0.0}, 1.0, 1e-3, 9);
  CHECK(g.values.size() == 1001);
  CHECK(g.t(1000) == doctest::Approx(1.0));
}

TEST_CASE("crossing counts and the tie rule") {
  const std::vector<double> x{-1.0, 1.0, 0.0, -0.5, 0.5, 0.5, -2.0};
  // Above/below with ties counted above: - + + - + + -
  CHECK(count_crossings(x, 0.0, CrossingMode::all) == 4);
  CHECK(count_crossings(x, 0.0, CrossingMode::up) == 2);
  CHECK(count_crossings(std::vector<double>{0.0, 0.0, 0.0}, 0.0, CrossingMode::all) == 0);
  CHECK(count_crossings(std::vector<double>{}, 0.0, CrossingMode::all) == 0);
}

TEST_CASE("refinement finds and polishes every crossing") {
  LineHarmonics cosine{{1.0}, {0.0}, 1.0};
  const RefinedCount c = refine_crossings(cosine, 0.0, 10.0 * pi, 0.0, 0.5);
  CHECK_FALSE(c.flagged);
  REQUIRE(c.count == 10);
  CHECK(c.up == 5);
  for (std::size_t k = 0; k < c.crossings.size(); ++k) {
    CHECK(c.crossings[k] == doctest::Approx(pi / 2.0 + pi * static_cast<double>(k)).epsilon(1e-11));
  }
  // A coarse start still resolves a nearly tangent pair of crossings.
  LineHarmonics bump{{1.0}, {0.0}, 1.0};
  const RefinedCount near = refine_crossings(bump, -1.0, 1.0, 0.999999, 1.0);
  CHECK(near.count == 2);
  CHECK_THROWS_AS(refine_crossings(cosine, 0.0, 1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("grid crossing expectation") {
  CHECK(grid_crossing_expectation(1.0, 1.0, 0.1) == 0.0);
  CHECK(grid_crossing_expectation(0.0, 1.0, 0.1) == doctest::Approx(5.0));
  CHECK(grid_crossing_expectation(-1.0, 1.0, 0.1) == doctest::Approx(10.0));
}

TEST_CASE("simulated counts match the grid oracle and do not depend on jobs") {
  const DirectionalSpectrum spec(SpectralModel::isotropic_gaussian(1, 1.0), {1.0});
  const double h = 0.2;
  const LineCounts a = simulate_line_counts(spec, 0.0, 10.0, h, 3001, 7, 1);
  const LineCounts b = simulate_line_counts(spec, 0.0, 10.0, h, 3001, 7, 3);
  CHECK(a.all == b.all);
  CHECK(a.up == b.up);
  RunningStats s;
  for (auto n : a.all) s.add(static_cast<double>(n));
  const double oracle = grid_crossing_expectation(spec.covariance(h), 10.0, h);
  CHECK(std::abs(s.mean() - oracle) < 4.0 * s.standard_error());
  for (std::size_t i = 0; i < a.all.size(); ++i) {
    CHECK(a.up[i] <= a.all[i]);
    CHECK(a.all[i] <= 2 * a.up[i] + 1);
  }
}

TEST_CASE("default grid step") {
  const auto g = SpectralModel::isotropic_gaussian(1, 2.0);
  CHECK(default_grid_step(g) == doctest::Approx(2.0 * pi / (2.0 * 1.959963984540054) / 20.0).epsilon(1e-6));
}

TEST_CASE("line CSV export") {
  LineGrid grid;
  grid.t_min = 0.0;
  grid.step = 0.5;
  grid.values = {1.0, -0.25};
  std::ostringstream out;
  write_line_csv(out, grid);
  CHECK(out.str() == "t,x\r\n0,1\r\n0.5,-0.25\r\n");
}

TEST_CASE("binary grid dump layout") {
  HarmonicEnsemble field(2, {1.0, 0.0, 0.0, 2.0}, {0.0, 0.5}, 77);
  std::stringstream buf;
  const std::vector<double> lower{0.0, -1.0};
  const std::vector<double> upper{1.0, 1.0};
  const std::vector<std::size_t> counts{3, 2};
  write_grid_dump(buf, field, lower, upper, counts);
  char magic[8];
  buf.read(magic, 8);
  CHECK(std::string(magic, 8) == "LSGRID01");
  CHECK(take<std::uint32_t>(buf) == 2);
  CHECK(take<std::uint32_t>(buf) == 2);
  CHECK(take<std::uint64_t>(buf) == 77);
  CHECK(take<double>(buf) == 0.0);
  CHECK(take<double>(buf) == -1.0);
  CHECK(take<double>(buf) == 1.0);
  CHECK(take<double>(buf) == 1.0);
  CHECK(take<std::uint64_t>(buf) == 3);
  CHECK(take<std::uint64_t>(buf) == 2);
  // Last axis fastest.
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const std::vector<double> p{0.5 * static_cast<double>(i), -1.0 + 2.0 * static_cast<double>(j)};
      CHECK(take<double>(buf) == doctest::Approx(field.evaluate(p)).epsilon(1e-14));
    }
  }
  CHECK(buf.peek() == std::char_traits<char>::eof());
}
