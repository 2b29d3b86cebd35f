#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "levelset/extended_real.hpp"
#include "levelset/line_kernel.hpp"
#include "levelset/rng.hpp"

namespace levelset {

class SpectralModel;

/// r(t) = exp(-scale^2 |t|^2 / 2); spectral measure N(0, scale^2 I).
struct IsotropicGaussian {
  double scale;
};

/// Isotropic Matern covariance of smoothness nu > 1/2, unit variance.
struct Matern {
  double smoothness;
  double scale;
};

/// r(t) = exp(-rate |t|): the Matern nu = 1/2 member, nowhere differentiable.
struct OrnsteinUhlenbeck {
  double rate;
};

/// Discrete spectral measure; frequencies come in +/- pairs.
struct CosineAtoms {
  std::vector<std::vector<double>> frequencies;
  std::vector<double> weights;
};

/// r(t) = exp(-t^T A t / 2) with A symmetric positive definite.
struct AnisotropicGaussian {
  Eigen::MatrixXd shape;
};

/// Independent one-dimensional models along the coordinate axes;
/// r(t) = prod_i r_i(t_i).
struct ProductSplit {
  std::vector<SpectralModel> axes;
};

/// Spectral measure uniform on the sphere of radius `wavenumber`.
struct RandomPlaneWave {
  double wavenumber;
};

using SpectralFamily = std::variant<IsotropicGaussian, Matern, OrnsteinUhlenbeck, CosineAtoms,
                                    AnisotropicGaussian, ProductSplit, RandomPlaneWave>;

/// d x d matrix of second spectral moments, entries possibly infinite.
struct MomentMatrix {
  int dimension = 0;
  std::vector<ExtReal> entries;  // row-major
  bool finite = true;
  /// Columns form an orthonormal basis of the directions with finite
  /// directional moment (all of R^d when `finite`).
  Eigen::MatrixXd finite_subspace;

  const ExtReal& operator()(int i, int j) const { return entries[i * dimension + j]; }

  /// v^T Lambda_2 v; infinite as soon as v has a component along an
  /// infinite entry.
  ExtReal quadratic_form(std::span<const double> v) const;

  /// The matrix as doubles; throws GateViolation when not finite.
  Eigen::MatrixXd matrix() const;

  static MomentMatrix from_finite(const Eigen::MatrixXd& m);
};

/// A stationary, unit-variance Gaussian covariance together with its
/// spectral measure. Constructed only through the validating factories.
class SpectralModel {
public:
  static SpectralModel isotropic_gaussian(int dimension, double scale);
  static SpectralModel matern(int dimension, double smoothness, double scale);
  static SpectralModel ornstein_uhlenbeck(int dimension, double rate);
  static SpectralModel cosine_atoms(std::vector<std::vector<double>> frequencies,
                                    std::vector<double> weights);
  static SpectralModel anisotropic_gaussian(const Eigen::MatrixXd& shape);
  /// Every axis model must be one-dimensional and not itself a product.
  static SpectralModel product_split(std::vector<SpectralModel> axes);
  static SpectralModel random_plane_wave(int dimension, double wavenumber);

  int dimension() const { return dimension_; }
  const SpectralFamily& family() const { return family_; }
  std::string family_name() const;

  /// Covariance restricted to the line through the origin along unit v.
  LineCovariance line_kernel(std::span<const double> v) const;

  /// Draw one frequency vector from the spectral measure into `out`.
  void sample_frequency(CounterRng& rng, std::span<double> out) const;

  /// Quantile of the spectral radius |lambda| (upper bound for
  /// anisotropic and product models).
  double spectral_radius_quantile(double q) const;

private:
  SpectralModel(SpectralFamily family, int dimension);

  SpectralFamily family_;
  int dimension_;
  Eigen::MatrixXd shape_factor_;  // Cholesky factor of A (anisotropic only)
};

double covariance(const SpectralModel& model, std::span<const double> t);
MomentMatrix lambda2_matrix(const SpectralModel& model);
ExtReal directional_lambda2(const SpectralModel& model, std::span<const double> v);

/// E|lambda|^{2+delta} under the spectral measure, for 0 < delta < 2.
ExtReal moment_2_plus_delta(const SpectralModel& model, double delta);

/// The model seen along a unit direction v.
class DirectionalSpectrum {
public:
  DirectionalSpectrum(SpectralModel model, std::vector<double> v);

  const SpectralModel& model() const { return model_; }
  const std::vector<double>& direction() const { return v_; }
  const LineCovariance& kernel() const { return kernel_; }

  double covariance(double tau) const;
  double derivative(double tau) const;
  LagValues lag(double tau) const;
  ExtReal lambda2() const { return lambda2_; }
  ExtReal moment_2_plus_delta(double delta) const;

  /// Natural inverse length of the kernel.
  double scale() const;

  /// Throws GateViolation when lambda_{2,v} is infinite.
  double finite_lambda2() const;

private:
  SpectralModel model_;
  std::vector<double> v_;
  LineCovariance kernel_;
  ExtReal lambda2_;
};

/// theta_v(tau) = r_v(tau) - 1 + lambda_{2,v} tau^2 / 2.
double theta(const DirectionalSpectrum& spec, double tau);
double theta_derivative(const DirectionalSpectrum& spec, double tau);

/// int_0^{2a} 2 theta_v'(tau) / tau^2 dtau, +inf when not integrable at 0.
ExtReal geman_integral(const DirectionalSpectrum& spec, double a);

/// sup over a uniform grid on (0, upper] of (u - sin u) / u^{1+delta}.
/// A diagnostic constant, not a certified bound.
double fitted_sine_gap_constant(double delta, double upper = 100.0, std::size_t grid = 100000);

}  // namespace levelset
