#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "levelset/crofton.hpp"
#include "levelset/errors.hpp"
#include "levelset/parallel.hpp"

using namespace levelset;

namespace {

constexpr double pi = std::numbers::pi;

LinePlan plan_for(LevelDomain domain, std::size_t lines, std::uint64_t seed = 1) {
  LinePlan p;
  p.domain = std::move(domain);
  p.lines = lines;
  p.seed = seed;
  p.jobs = 2;
  return p;
}

}  // namespace

TEST_CASE("shadow measures") {
  const Ball disc{{0.0, 0.0}, 1.5};
  CHECK(shadow_measure(disc, std::vector<double>{1.0, 0.0}) == doctest::Approx(3.0));
  const Ball ball{{0.0, 0.0, 0.0}, 2.0};
  CHECK(shadow_measure(ball, std::vector<double>{0.0, 0.0, 1.0}) == doctest::Approx(4.0 * pi));
  const Box square{{0.0, 0.0}, {1.0, 1.0}};
  const double a = 0.3;
  CHECK(shadow_measure(square, std::vector<double>{std::cos(a), std::sin(a)}) ==
        doctest::Approx(std::cos(a) + std::sin(a)));
  // Cauchy: the mean shadow of a convex body in the plane is perimeter / pi.
  const Box rect{{0.0, 0.0}, {2.0, 1.0}};
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double phi = 2.0 * pi * (i + 0.5) / n;
    mean += shadow_measure(rect, std::vector<double>{std::cos(phi), std::sin(phi)}) / n;
  }
  CHECK(mean == doctest::Approx(6.0 / pi).epsilon(1e-8));
}

TEST_CASE("chords of the domain") {
  const LevelDomain ball{0.0, Ball{{1.0, 1.0}, 2.0}};
  const auto through = segment_in_domain(ball, std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0});
  REQUIRE(through);
  CHECK(through->second - through->first == doctest::Approx(4.0));
  CHECK_FALSE(segment_in_domain(ball, std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 3.5}));
  const LevelDomain box{0.0, Box{{0.0, 0.0}, {1.0, 1.0}}};
  const double s = std::sqrt(0.5);
  const auto diag = segment_in_domain(box, std::vector<double>{s, s}, std::vector<double>{0.0, 0.0});
  REQUIRE(diag);
  CHECK(diag->second - diag->first == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(segment_in_domain(box, std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("sampled lines meet the domain and carry the Crofton weight") {
  for (const LevelDomain& dom : {LevelDomain{0.0, Ball{{0.3, -0.2, 1.0}, 0.7}},
                                 LevelDomain{0.0, Box{{0.0, 0.0, 0.0}, {1.0, 2.0, 0.5}}},
                                 LevelDomain{0.0, Box{{-1.0, 0.0}, {1.0, 3.0}}}}) {
    const int d = dom.dimension();
    CounterRng rng(4, 5);
    const double area = 2.0 * std::pow(pi, d / 2.0) / std::tgamma(d / 2.0);
    int hits = 0;
    for (int i = 0; i < 2000; ++i) {
      const LineDraw l = sample_line(dom, rng);
      CHECK(l.v.size() == static_cast<std::size_t>(d));
      double vy = 0.0;
      for (int k = 0; k < d; ++k) vy += l.v[k] * l.y[k];
      CHECK(std::abs(vy) < 1e-12);
      CHECK(l.weight == doctest::Approx(crofton_constant(d) * area * shadow_measure(dom.region, l.v)));
      hits += segment_in_domain(dom, l.v, l.y).has_value() ? 1 : 0;
    }
    CHECK(hits >= 1998);
  }
}

TEST_CASE("shape oracle reproduces exact measures") {
  SUBCASE("circle") {
    const auto est = deterministic_shape_oracle(SphereShape{{0.0, 0.0}, 1.0},
                                                plan_for(LevelDomain{0.0, Ball{{0.0, 0.0}, 1.2}}, 50000));
    CHECK(std::abs(est.value - 2.0 * pi) < 4.0 * est.standard_error);
  }
  SUBCASE("segment in a box") {
    const auto est = deterministic_shape_oracle(HyperplanePatch{{0.5, 0.5}, {0.0, 1.0}, 0.3},
                                                plan_for(LevelDomain{0.0, Box{{0.0, 0.0}, {1.0, 1.0}}}, 50000));
    CHECK(std::abs(est.value - 0.6) < 4.0 * est.standard_error);
  }
  SUBCASE("disc in space") {
    const double s = 1.0 / std::sqrt(3.0);
    const auto est = deterministic_shape_oracle(HyperplanePatch{{0.0, 0.0, 0.0}, {s, s, s}, 0.8},
                                                plan_for(LevelDomain{0.0, Ball{{0.0, 0.0, 0.0}, 1.0}}, 50000));
    CHECK(std::abs(est.value - pi * 0.64) < 4.0 * est.standard_error);
  }
  SUBCASE("points on the line") {
    const auto est = deterministic_shape_oracle(PointSet{{0.1, 0.4, 0.45}},
                                                plan_for(LevelDomain{0.0, Box{{0.0}, {1.0}}}, 100));
    CHECK(est.value == doctest::Approx(3.0));
    CHECK(est.standard_error == doctest::Approx(0.0));
  }
  CHECK(shape_measure(SphereShape{{0.0, 0.0, 0.0}, 2.0}) == doctest::Approx(16.0 * pi));
  CHECK(shape_measure(HyperplanePatch{{0.0, 0.0}, {1.0, 0.0}, 0.5}) == doctest::Approx(1.0));
}

TEST_CASE("shape intersections") {
  const std::vector<double> v{1.0, 0.0};
  CHECK(shape_intersections(SphereShape{{0.0, 0.0}, 1.0}, v, std::vector<double>{0.0, 0.5}, -5.0, 5.0) == 2);
  CHECK(shape_intersections(SphereShape{{0.0, 0.0}, 1.0}, v, std::vector<double>{0.0, 0.5}, 0.0, 5.0) == 1);
  CHECK(shape_intersections(SphereShape{{0.0, 0.0}, 1.0}, v, std::vector<double>{0.0, 1.5}, -5.0, 5.0) == 0);
  CHECK(shape_intersections(HyperplanePatch{{0.0, 0.0}, {1.0, 0.0}, 1.0}, v, std::vector<double>{0.0, 0.5}, -1, 1) == 1);
  CHECK(shape_intersections(HyperplanePatch{{0.0, 0.0}, {1.0, 0.0}, 1.0}, v, std::vector<double>{0.0, 1.5}, -1, 1) == 0);
}

TEST_CASE("Crofton estimate of a deterministic level set") {
  // X(t) = sqrt(2) cos(t_1): {X = 0} in [0, 2 pi] x [0, 1] is two unit segments.
  const HarmonicEnsemble field(2, {1.0, 0.0}, {0.0}, 0);
  LinePlan plan = plan_for(LevelDomain{0.0, Box{{0.0, 0.0}, {2.0 * pi, 1.0}}}, 40000);
  const CroftonEstimate est = crofton_estimate(field, 0.0, plan, 0, true);
  CHECK(est.n_flagged == 0);
  CHECK(std::abs(est.value - 2.0) < 4.0 * est.standard_error);
  CHECK(est.records.size() == 40000);
  // Level 1: cos t_1 = 1/sqrt 2 at t_1 = pi/4 and 7 pi/4; level 2 is never reached.
  const CroftonEstimate one = crofton_estimate(field, 1.0, plan);
  CHECK(std::abs(one.value - 2.0) < 4.0 * one.standard_error);
  CHECK(crofton_estimate(field, 2.0, plan).value == 0.0);
  // Without refinement the grid count is a lower bound on every line.
  plan.refinement = false;
  plan.step = 0.05;
  const CroftonEstimate grid = crofton_estimate(field, 0.0, plan);
  for (std::size_t i = 0; i < grid.counts.size(); ++i) CHECK(grid.counts[i] <= est.counts[i]);
}

TEST_CASE("results do not depend on the number of jobs") {
  const auto model = SpectralModel::isotropic_gaussian(2, 2.0);
  const auto field = HarmonicEnsemble::sample(model, 128, 3, 0);
  LinePlan plan = plan_for(LevelDomain{0.0, Box{{0.0, 0.0}, {1.0, 1.0}}}, 500, 3);
  plan.jobs = 1;
  const auto a = crofton_estimate(field, 0.2, plan);
  plan.jobs = 3;
  const auto b = crofton_estimate(field, 0.2, plan);
  CHECK(a.value == b.value);
  CHECK(a.counts == b.counts);
}

TEST_CASE("moment estimation") {
  const auto model = SpectralModel::isotropic_gaussian(2, 2.0);
  LinePlan plan = plan_for(LevelDomain{0.0, Box{{0.0, 0.0}, {1.0, 1.0}}}, 100, 8);
  MomentPlan mp;
  mp.realizations = 40;
  mp.harmonics = 128;
  mp.bootstrap = 200;
  const MomentReport r = estimate_moments(model, 0.0, plan, mp);
  CHECK(r.values.size() == 40);
  CHECK(r.moments.size() == 4);
  CHECK(r.total_lines == 4000);
  for (const auto& m : r.moments) {
    CHECK(m.finite);
    CHECK(m.ci_low <= m.value);
    CHECK(m.value <= m.ci_high);
  }
  double mean = 0.0;
  for (double x : r.values) mean += x / 40.0;
  CHECK(r.moments[0].value == doctest::Approx(mean));
  CHECK(r.mean == doctest::Approx(mean));
  // Expected length is 2 * F(4 I) = 1 for this model.
  CHECK(std::abs(r.mean - 1.0) < 4.0 * r.standard_error);
  plan.jobs = 1;
  const MomentReport serial = estimate_moments(model, 0.0, plan, mp);
  CHECK(serial.values == r.values);

  mp.realizations = 10;
  CHECK_THROWS_AS(estimate_moments(model, 0.0, plan, mp), std::invalid_argument);
  mp.realizations = 30;
  CHECK_THROWS_AS(estimate_moments(SpectralModel::ornstein_uhlenbeck(2, 1.0), 0.0, plan, mp), GateViolation);
}
