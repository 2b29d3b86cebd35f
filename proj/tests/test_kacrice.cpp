#include <doctest.h>

#include <boost/math/special_functions/ellint_2.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "levelset/errors.hpp"
#include "levelset/kacrice.hpp"

using namespace levelset;

namespace {

constexpr double pi = std::numbers::pi;

double closed_f(int d, double lambda) {
  return std::sqrt(lambda) * std::tgamma((d + 1) / 2.0) / (std::sqrt(pi) * std::tgamma(d / 2.0));
}

// Covariance of (X(0), X(tau), X'(0), X'(tau)) for r(t) = exp(-l t^2 / 2).
template <class T>
Eigen::Matrix<T, 4, 4> gaussian_joint(T l, T tau) {
  const T r = std::exp(-l * tau * tau / 2);
  const T r1 = -l * tau * r;                // r'(tau)
  const T r2 = (l * l * tau * tau - l) * r;  // r''(tau)
  Eigen::Matrix<T, 4, 4> c;
  // Cov(X(s), X'(t)) = r'(t - s); Cov(X'(s), X'(t)) = -r''(t - s).
  c << 1, r, 0, r1,
       r, 1, -r1, 0,
       0, -r1, l, -r2,
       r1, 0, -r2, l;
  return c;
}

template <class T>
struct Conditioned {
  Eigen::Matrix<T, 2, 1> mean;
  Eigen::Matrix<T, 2, 2> cov;
};

template <class T>
Conditioned<T> condition(const Eigen::Matrix<T, 4, 4>& c, T u) {
  using M2 = Eigen::Matrix<T, 2, 2>;
  const M2 a = c.template topLeftCorner<2, 2>();
  const M2 b = c.template bottomLeftCorner<2, 2>();
  const M2 d = c.template bottomRightCorner<2, 2>();
  const M2 k = b * a.inverse();
  return {k * Eigen::Matrix<T, 2, 1>(u, u), d - k * b.transpose()};
}

// E|Y1||Y2| for a centered pair.
template <class T>
T centered_abs(T v1, T v2, T c) {
  const T s = std::sqrt(v1 * v2);
  return 2 / std::numbers::pi_v<T> * (std::sqrt(v1 * v2 - c * c) + c * std::asin(std::clamp(c / s, T(-1), T(1))));
}

// Second factorial moment at u = 0 by direct conditioning in long double and
// a midpoint rule in log tau. Naive conditioning loses accuracy as tau -> 0,
// so below tau0 the pair intensity g(tau) = a tau + b tau^3 is fitted from two
// lags and integrated exactly.
double naive_second_moment(double l, double length) {
  using T = long double;
  auto g = [&](T tau) {
    const auto c = condition<T>(gaussian_joint<T>(l, tau), 0);
    const T r = std::exp(-T(l) * tau * tau / 2);
    const T density = 1 / (2 * std::numbers::pi_v<T> * std::sqrt(1 - r * r));
    return centered_abs<T>(c.cov(0, 0), c.cov(1, 1), c.cov(0, 1)) * density;
  };
  const T tau0 = 0.05L;
  const T t1 = tau0 / 2;
  const T g0 = g(tau0) / tau0;
  const T g1 = g(t1) / t1;
  const T b = (g0 - g1) / (tau0 * tau0 - t1 * t1);
  const T a = g0 - b * tau0 * tau0;
  const T big = length;
  T sum = 2 * (a * (big * tau0 * tau0 / 2 - tau0 * tau0 * tau0 / 3) +
               b * (big * std::pow(tau0, 4) / 4 - std::pow(tau0, 5) / 5));
  const int n = 200000;
  const T lo = std::log(tau0);
  const T hi = std::log(big);
  for (int i = 0; i < n; ++i) {
    const T tau = std::exp(lo + (hi - lo) * (i + 0.5L) / n);
    sum += 2 * (big - tau) * g(tau) * tau * (hi - lo) / n;
  }
  return static_cast<double>(sum);
}

}  // namespace

TEST_CASE("Crofton constants") {
  CHECK(crofton_constant(1) == doctest::Approx(0.5));
  CHECK(crofton_constant(2) == doctest::Approx(0.25));
  CHECK(crofton_constant(3) == doctest::Approx(1.0 / (2.0 * pi)));
}

TEST_CASE("F of an isotropic matrix has a closed form") {
  for (int d = 1; d <= 4; ++d) {
    for (double lambda : {0.25, 1.0, 4.0}) {
      const auto m = MomentMatrix::from_finite(lambda * Eigen::MatrixXd::Identity(d, d));
      CHECK(f_lambda2_sphere(m).value.value() == doctest::Approx(closed_f(d, lambda)).epsilon(1e-6));
    }
  }
  CHECK(closed_f(1, 1.0) == doctest::Approx(1.0 / pi));
  CHECK(closed_f(2, 1.0) == doctest::Approx(0.5));
  CHECK(closed_f(3, 1.0) == doctest::Approx(2.0 / pi));
}

TEST_CASE("F of a planar diagonal matrix is an elliptic integral") {
  // (1/(4 pi)) int_0^{2 pi} sqrt(a cos^2 + b sin^2) = sqrt(a) E(k) / pi, k^2 = 1 - b/a.
  for (auto [a, b] : {std::pair{4.0, 1.0}, std::pair{2.0, 0.5}, std::pair{1.0, 0.01}}) {
    Eigen::MatrixXd m(2, 2);
    m << a, 0.0, 0.0, b;
    const double expected = std::sqrt(a) * boost::math::ellint_2(std::sqrt(1.0 - b / a)) / pi;
    CHECK(f_lambda2_sphere(MomentMatrix::from_finite(m)).value.value() == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("F by Gaussian Monte Carlo agrees with the sphere integral") {
  Eigen::MatrixXd m(3, 3);
  m << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5;
  const auto l2 = MomentMatrix::from_finite(m);
  const RiceValue s = f_lambda2_sphere(l2);
  const RiceValue mc = f_lambda2_mc(l2, 200000, 3, 2);
  CHECK(mc.method == RiceMethod::gaussian_mc);
  CHECK(std::abs(mc.value.value() - s.value.value()) < 4.0 * std::hypot(mc.standard_error, s.standard_error));
  // Same result for any number of jobs.
  CHECK(f_lambda2_mc(l2, 200000, 3, 1).value.value() == mc.value.value());
  CHECK_THROWS_AS(f_lambda2_mc(l2, 10, 3), std::invalid_argument);
}

TEST_CASE("infinite moments propagate to infinity") {
  const auto ou = SpectralModel::ornstein_uhlenbeck(2, 1.0);
  CHECK(f_lambda2_sphere(lambda2_matrix(ou)).value.is_infinite());
  LevelDomain dom{0.0, Box{{0.0, 0.0}, {1.0, 1.0}}};
  CHECK(expected_volume(ou, dom).value.is_infinite());
  CHECK(expected_crossings_1d(ExtReal::infinity(), 1.0, 2.0).is_infinite());
}

TEST_CASE("expected volume") {
  const auto g = SpectralModel::isotropic_gaussian(2, 1.0);
  LevelDomain box{0.0, Box{{0.0, 0.0}, {1.0, 1.0}}};
  CHECK(expected_volume(g, box).value.value() == doctest::Approx(0.5));
  box.level = 1.0;
  CHECK(expected_volume(g, box).value.value() == doctest::Approx(0.5 * std::exp(-0.5)));
  LevelDomain ball{0.0, Ball{{0.0, 0.0, 0.0}, 2.0}};
  const auto g3 = SpectralModel::isotropic_gaussian(3, 2.0);
  CHECK(expected_volume(g3, ball).value.value() ==
        doctest::Approx(4.0 / 3.0 * pi * 8.0 * closed_f(3, 4.0)).epsilon(1e-12));
  // Anisotropic: volume scales with F of the matrix.
  Eigen::MatrixXd a(2, 2);
  a << 3.0, 0.0, 0.0, 1.0;
  LevelDomain unit{0.0, Box{{0.0, 0.0}, {2.0, 1.0}}};
  const double expected = 2.0 * std::sqrt(3.0) * boost::math::ellint_2(std::sqrt(1.0 - 1.0 / 3.0)) / pi;
  CHECK(expected_volume(SpectralModel::anisotropic_gaussian(a), unit).value.value() ==
        doctest::Approx(expected).epsilon(1e-8));
  LevelDomain bad{0.0, Box{{0.0, 1.0}, {1.0, 1.0}}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(expected_volume(SpectralModel::isotropic_gaussian(3, 1.0), box), std::invalid_argument);
}

TEST_CASE("domain geometry") {
  const LevelDomain box{0.0, Box{{0.0, -1.0}, {2.0, 1.0}}};
  CHECK(box.dimension() == 2);
  CHECK(box.lebesgue() == doctest::Approx(4.0));
  CHECK(box.diameter() == doctest::Approx(std::sqrt(8.0)));
  const LevelDomain ball{0.0, Ball{{1.0, 1.0, 1.0}, 0.5}};
  CHECK(ball.lebesgue() == doctest::Approx(4.0 / 3.0 * pi / 8.0));
  CHECK(ball.diameter() == doctest::Approx(1.0));
}

TEST_CASE("Cramer-Leadbetter rate") {
  CHECK(expected_crossings_1d(ExtReal(4.0), 0.0, 3.0).value() == doctest::Approx(6.0 / pi));
  CHECK(expected_crossings_1d(ExtReal(1.0), 2.0, 1.0).value() == doctest::Approx(std::exp(-2.0) / pi));
}

TEST_CASE("conditional law of the derivative pair matches direct conditioning") {
  const double l = 1.3;
  const DirectionalSpectrum spec(SpectralModel::isotropic_gaussian(1, std::sqrt(l)), {1.0});
  for (double tau : {0.05, 0.5, 1.0, 2.0, 4.0}) {
    for (double u : {0.0, 1.0, -2.0}) {
      const auto ref = condition<double>(gaussian_joint<double>(l, tau), u);
      const ConditionalPair p = conditional_pair(spec, tau, u);
      CHECK(p.mean == doctest::Approx(ref.mean(0)).epsilon(1e-9));
      CHECK(-p.mean == doctest::Approx(ref.mean(1)).epsilon(1e-9));
      CHECK(p.variance == doctest::Approx(ref.cov(0, 0)).epsilon(1e-9));
      CHECK(p.covariance == doctest::Approx(ref.cov(0, 1)).epsilon(1e-9));
      CHECK(conditional_mean_derivative(spec, tau, u) == doctest::Approx(ref.mean(0)).epsilon(1e-9));
      CHECK(conditional_variance_derivative(spec, tau) == doctest::Approx(ref.cov(0, 0)).epsilon(1e-9));
    }
  }
  // Unit Gaussian at tau = 1: lambda - r'^2 / (1 - r^2).
  const DirectionalSpectrum unit(SpectralModel::isotropic_gaussian(1, 1.0), {1.0});
  const double e = std::exp(-0.5);
  CHECK(conditional_variance_derivative(unit, 1.0) == doctest::Approx(1.0 - e * e / (1.0 - e * e)).epsilon(1e-12));
  CHECK(conditional_mean_derivative(unit, 1.0, 1.0) == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
}

TEST_CASE("pair density is the bivariate normal density on the diagonal") {
  const DirectionalSpectrum spec(SpectralModel::isotropic_gaussian(1, 1.0), {1.0});
  for (double tau : {0.1, 1.0, 3.0}) {
    const LagValues lag = spec.lag(tau);
    for (double u : {0.0, 0.7}) {
      const double r = lag.r;
      const double q = (u * u - 2 * r * u * u + u * u) / (1 - r * r);
      const double expected = std::exp(-q / 2.0) / (2.0 * pi * std::sqrt(1 - r * r));
      CHECK(pair_density(lag, u) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("bivariate absolute and positive-part expectations") {
  CHECK(centered_crossing_expectation(1.0, 2.0, 0.3, CrossingMode::all) ==
        doctest::Approx(centered_abs<double>(1.0, 2.0, 0.3)).epsilon(1e-12));
  CHECK(centered_crossing_expectation(1.0, 2.0, 0.3, CrossingMode::up) ==
        doctest::Approx(centered_abs<double>(1.0, 2.0, 0.3) / 4.0 + 0.3 / 4.0).epsilon(1e-12));
  CHECK(bivariate_crossing_expectation(0.0, 0.0, 1.5, 0.8, -0.4, CrossingMode::all) ==
        doctest::Approx(centered_abs<double>(1.5, 0.8, -0.4)).epsilon(1e-9));
  // Nonzero means: Monte Carlo oracle.
  std::mt19937_64 gen(42);
  std::normal_distribution<double> z;
  const double m1 = 0.7, m2 = -0.3, v1 = 1.2, v2 = 0.6, c = 0.4;
  const double a = std::sqrt(v1);
  const double b1 = c / a;
  const double b2 = std::sqrt(v2 - b1 * b1);
  double s_all = 0, s2_all = 0, s_up = 0, s2_up = 0;
  const int n = 2000000;
  for (int i = 0; i < n; ++i) {
    const double g1 = z(gen), g2 = z(gen);
    const double y1 = m1 + a * g1;
    const double y2 = m2 + b1 * g1 + b2 * g2;
    const double all = std::abs(y1 * y2);
    const double up = std::max(y1, 0.0) * std::max(y2, 0.0);
    s_all += all;
    s2_all += all * all;
    s_up += up;
    s2_up += up * up;
  }
  const double mean_all = s_all / n, se_all = std::sqrt((s2_all / n - mean_all * mean_all) / n);
  const double mean_up = s_up / n, se_up = std::sqrt((s2_up / n - mean_up * mean_up) / n);
  CHECK(std::abs(bivariate_crossing_expectation(m1, m2, v1, v2, c, CrossingMode::all) - mean_all) < 4 * se_all);
  CHECK(std::abs(bivariate_crossing_expectation(m1, m2, v1, v2, c, CrossingMode::up) - mean_up) < 4 * se_up);
}

TEST_CASE("second factorial moment: Gaussian against direct quadrature") {
  const DirectionalSpectrum spec(SpectralModel::isotropic_gaussian(1, 1.0), {1.0});
  for (double length : {1.0, 5.0}) {
    const SecondMoment m = second_factorial_moment_1d(spec, 0.0, length);
    CHECK(m.singular == 0.0);
    CHECK(m.value == doctest::Approx(naive_second_moment(1.0, length)).epsilon(1e-5));
  }
  // Up-crossings never exceed all crossings; raising |u| lowers the moment.
  const double all = second_factorial_moment_1d(spec, 0.5, 3.0, CrossingMode::all).value;
  const double up = second_factorial_moment_1d(spec, 0.5, 3.0, CrossingMode::up).value;
  CHECK(up < all);
  CHECK(second_factorial_moment_1d(spec, 1.5, 3.0).value < all);
}

TEST_CASE("second factorial moment: periodic atoms") {
  // X(t) = R cos(t + phi) with Rayleigh R: on [0, 2 pi] N = 2 when R > |u|.
  const DirectionalSpectrum spec(SpectralModel::cosine_atoms({{1.0}, {-1.0}}, {0.5, 0.5}), {1.0});
  for (double u : {0.0, 0.5, 1.0}) {
    const SecondMoment m = second_factorial_moment_1d(spec, u, 2.0 * pi);
    CHECK(m.value == doctest::Approx(2.0 * std::exp(-u * u / 2.0)).epsilon(1e-6));
  }
  const SecondMoment zero = second_factorial_moment_1d(spec, 0.0, 2.0 * pi);
  CHECK(zero.value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(zero.singular > 0.0);
  CHECK_FALSE(zero.singular_lags.empty());
}

TEST_CASE("second factorial moment requires finite lambda2") {
  const DirectionalSpectrum ou(SpectralModel::ornstein_uhlenbeck(1, 1.0), {1.0});
  CHECK_THROWS_AS(second_factorial_moment_1d(ou, 0.0, 1.0), GateViolation);
}
