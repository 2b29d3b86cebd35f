#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "levelset/extended_real.hpp"
#include "levelset/spectral.hpp"

namespace levelset {

struct Ball {
  std::vector<double> center;
  double radius = 1.0;
};

/// Axis-aligned box, lower[i] < upper[i].
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

using Region = std::variant<Ball, Box>;

struct LevelDomain {
  double level = 0.0;
  Region region;

  /// Throws std::invalid_argument on a degenerate region.
  void validate() const;
  int dimension() const;
  double lebesgue() const;
  /// Largest distance between two points of the region.
  double diameter() const;
};

enum class RiceMethod { sphere_quadrature, gaussian_mc, closed_form };

std::string to_string(RiceMethod method);

struct RiceValue {
  ExtReal value;
  RiceMethod method = RiceMethod::closed_form;
  double standard_error = 0.0;
};

/// c_{d-1} = Gamma((d+1)/2) / (2 pi^{(d-1)/2}).
double crofton_constant(int d);

/// F(Lambda_2) = c_{d-1}/pi * int_{S^{d-1}} sqrt(v^T Lambda_2 v) dS(v).
RiceValue f_lambda2_sphere(const MomentMatrix& lambda2);

/// F(Lambda_2) = E sqrt(Z^T Lambda_2 Z) / sqrt(2 pi), Z standard normal,
/// by Monte Carlo over n draws (n >= 1000).
RiceValue f_lambda2_mc(const MomentMatrix& lambda2, std::size_t n, std::uint64_t seed, std::size_t jobs = 1);

/// Expected (d-1)-volume of the level set {X = u} inside K.
RiceValue expected_volume(const SpectralModel& model, const LevelDomain& domain);

/// Expected number of u-crossings on an interval of length T.
ExtReal expected_crossings_1d(ExtReal lambda2, double u, double length);

/// Law of (X'(0), X'(tau)) given X(0) = X(tau) = u: means (mean, -mean),
/// common variance, and covariance.
struct ConditionalPair {
  double mean = 0.0;
  double variance = 0.0;
  double covariance = 0.0;
};

ConditionalPair conditional_pair(const DirectionalSpectrum& spec, double tau, double u);

/// E(X'(0) | X(0) = X(tau) = u) = -r'(tau) u / (1 + r(tau)).
double conditional_mean_derivative(const DirectionalSpectrum& spec, double tau, double u);

/// Var(X'(0) | X(0) = X(tau)) = lambda_2 - r'(tau)^2 / (1 - r(tau)^2).
double conditional_variance_derivative(const DirectionalSpectrum& spec, double tau);

/// Density of (X(0), X(tau)) at (u, u).
double pair_density(const LagValues& lag, double u);

enum class CrossingMode { all, up };

/// E[g(Y1) g(Y2)] for a Gaussian pair with means (m1, m2), variances
/// (v1, v2) and covariance c, where g(y) = |y| (all) or max(y, 0) (up).
double bivariate_crossing_expectation(double m1, double m2, double v1, double v2, double c, CrossingMode mode);

/// Closed form of the above at zero means.
double centered_crossing_expectation(double v1, double v2, double c, CrossingMode mode);

struct SecondMomentOptions {
  double relative_tolerance = 1e-9;
  unsigned max_depth = 18;
};

struct SecondMoment {
  double value = 0.0;
  /// Contribution of the absolutely continuous part of the pair intensity.
  double regular = 0.0;
  /// Contribution of lags tau* with |r(tau*)| = 1 (periodic atomic
  /// spectra), where X(t + tau*) = +/- X(t) identically.
  double singular = 0.0;
  std::vector<double> singular_lags;
};

/// Second factorial moment of the number of u-crossings (all) or
/// up-crossings (up) of the line process on [0, T].
SecondMoment second_factorial_moment_1d(const DirectionalSpectrum& spec, double u, double length,
                                        CrossingMode mode = CrossingMode::all,
                                        const SecondMomentOptions& options = {});

}  // namespace levelset
