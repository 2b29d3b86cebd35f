#include "levelset/sphere_quadrature.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "levelset/parallel.hpp"
#include "levelset/rng.hpp"

namespace levelset {

namespace {

constexpr int kCircleNodes = 4096;
constexpr int kShifts = 16;
constexpr int kPointsPerShift = 1024;
constexpr std::uint64_t kShiftSeed = 0x5eed5eedull;

// Generalised golden ratio: the positive root of x^{n+1} = x + 1.
double generalised_golden_ratio(int n) {
  double x = 2.0;
  for (int i = 0; i < 64; ++i) x = std::pow(1.0 + x, 1.0 / (n + 1));
  return x;
}

}  // namespace

double sphere_area(int d) {
  if (d < 1) throw std::invalid_argument("sphere_area: d must be positive");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

double unit_ball_volume(int d) {
  if (d < 1) throw std::invalid_argument("unit_ball_volume: d must be positive");
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

SphereIntegral integrate_sphere(int d, const SphereFunction& f) {
  if (d < 1) throw std::invalid_argument("integrate_sphere: d must be positive");
  if (d == 1) {
    const double plus[1] = {1.0};
    const double minus[1] = {-1.0};
    return {f(plus) + f(minus), 0.0};
  }
  if (d == 2) {
    double sum = 0.0;
    for (int k = 0; k < kCircleNodes; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / kCircleNodes;
      const double v[2] = {std::cos(angle), std::sin(angle)};
      sum += f(v);
    }
    return {2.0 * std::numbers::pi * sum / kCircleNodes, 0.0};
  }

  // d = 3 uses the area-preserving cylinder map of the unit square; higher
  // dimensions push a d-dimensional point set through the normal quantile
  // function and project radially.
  const int qmc_dim = d == 3 ? 2 : d;
  const double phi = generalised_golden_ratio(qmc_dim);
  std::vector<double> alpha(qmc_dim);
  for (int j = 0; j < qmc_dim; ++j) alpha[j] = std::fmod(std::pow(1.0 / phi, j + 1), 1.0);

  CounterRng rng(kShiftSeed, derive_stream(StreamTag::sphere_shift, static_cast<std::uint64_t>(d)));
  RunningStats across_shifts;
  std::vector<double> point(qmc_dim), v(d);
  for (int s = 0; s < kShifts; ++s) {
    std::vector<double> shift(qmc_dim);
    for (double& x : shift) x = rng.uniform();
    double sum = 0.0;
    for (int i = 0; i < kPointsPerShift; ++i) {
      for (int j = 0; j < qmc_dim; ++j) {
        point[j] = std::clamp(std::fmod(shift[j] + (i + 1) * alpha[j], 1.0), 1e-16, 1.0 - 1e-16);
      }
      if (d == 3) {
        const double z = 1.0 - 2.0 * point[0];
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double angle = 2.0 * std::numbers::pi * point[1];
        v[0] = rho * std::cos(angle);
        v[1] = rho * std::sin(angle);
        v[2] = z;
      } else {
        double norm2 = 0.0;
        for (int j = 0; j < d; ++j) {
          v[j] = std::numbers::sqrt2 * boost::math::erf_inv(2.0 * point[j] - 1.0);
          norm2 += v[j] * v[j];
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
      }
      sum += f(v);
    }
    across_shifts.add(sum / kPointsPerShift);
  }
  const double area = sphere_area(d);
  return {area * across_shifts.mean(), area * across_shifts.standard_error()};
}

}  // namespace levelset
