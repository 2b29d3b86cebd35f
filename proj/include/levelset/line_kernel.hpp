#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "levelset/extended_real.hpp"

namespace levelset {

/// Covariance of the field restricted to a line, r_v(tau) = r(tau v), and
/// the derived lag quantities, each evaluated without catastrophic
/// cancellation where a stable form exists.
struct LagValues {
  double r = 1.0;
  double dr = 0.0;
  double d2r = 0.0;
  double one_minus_r = 0.0;
  /// theta(tau) = r(tau) - 1 + lambda2 tau^2 / 2 and its derivatives.
  /// NaN when lambda2 is infinite.
  double theta = 0.0;
  double dtheta = 0.0;
  double d2theta = 0.0;
};

/// r(tau) = exp(-lambda2 tau^2 / 2).
struct GaussianLine {
  double lambda2;
};

/// Matern covariance 2^{1-nu}/Gamma(nu) x^nu K_nu(x), x = scale |tau|.
/// smoothness = 1/2 is the exponential (Ornstein-Uhlenbeck) covariance.
struct MaternLine {
  double smoothness;
  double scale;
};

/// r(tau) = sum_k w_k cos(omega_k tau). The atom list is symmetric.
struct AtomLine {
  std::vector<double> frequencies;
  std::vector<double> weights;
};

/// Line restriction of the random plane wave in R^d (d >= 2):
/// Gamma(d/2) (2/x)^{d/2-1} J_{d/2-1}(x), x = wavenumber |tau|.
struct PlaneWaveLine {
  double wavenumber;
  int dimension;
};

using BaseLine = std::variant<GaussianLine, MaternLine, AtomLine, PlaneWaveLine>;

/// r(tau) = prod_i r_i(tau); each factor already carries its direction scaling.
struct ProductLine {
  std::vector<BaseLine> factors;
};

using LineCovariance = std::variant<GaussianLine, MaternLine, AtomLine, PlaneWaveLine, ProductLine>;

/// Builds a product kernel: trivial factors are dropped, an all-atomic product
/// is convolved into a single AtomLine, and a single factor is returned as is.
LineCovariance make_product_line(std::vector<BaseLine> factors);

LagValues lag_values(const LineCovariance& kernel, double tau);
double line_covariance(const LineCovariance& kernel, double tau);

/// -r''(0): the directional second spectral moment.
ExtReal line_lambda2(const LineCovariance& kernel);

/// E|omega|^p for the one-dimensional spectral measure of the line.
ExtReal line_absolute_moment(const LineCovariance& kernel, double p);

/// Inverse length setting the natural lag scale of the kernel.
double line_scale(const LineCovariance& kernel);

bool is_atomic(const LineCovariance& kernel);

/// Integral of g against the one-dimensional spectral measure of a factor.
double integrate_spectral(const BaseLine& factor, const std::function<double(double)>& g);

// Cancellation-free helpers, exposed for tests.
double exp_theta(double x);   // e^{-x} - 1 + x
double cos_theta(double y);   // cos y - 1 + y^2/2
double sine_gap(double y);    // y - sin y
double versine(double y);     // 1 - cos y

}  // namespace levelset
