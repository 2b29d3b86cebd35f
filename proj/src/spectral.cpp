#include "levelset/spectral.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "levelset/errors.hpp"

namespace levelset {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kUnitTolerance = 1e-12;

double norm_of(std::span<const double> t) {
  double s = 0.0;
  for (double x : t) s += x * x;
  return std::sqrt(s);
}

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

/// Kernel of a one-dimensional axis model along a coordinate scaled by c.
BaseLine axis_line(const SpectralModel& axis, double c) {
  return std::visit(
      Overloaded{
          [c](const IsotropicGaussian& g) -> BaseLine { return GaussianLine{g.scale * g.scale * c * c}; },
          [c](const Matern& m) -> BaseLine { return MaternLine{m.smoothness, m.scale * std::abs(c)}; },
          [c](const OrnsteinUhlenbeck& o) -> BaseLine { return MaternLine{0.5, o.rate * std::abs(c)}; },
          [c](const CosineAtoms& a) -> BaseLine {
            AtomLine line;
            for (const auto& f : a.frequencies) line.frequencies.push_back(f[0] * c);
            line.weights = a.weights;
            return line;
          },
          [c](const AnisotropicGaussian& a) -> BaseLine { return GaussianLine{a.shape(0, 0) * c * c}; },
          [](const auto&) -> BaseLine { throw std::logic_error("axis_line: unsupported axis family"); },
      },
      axis.family());
}

/// Sort atoms by frequency and merge exact (to rounding) duplicates.
AtomLine merge_atoms(std::vector<double> freq, std::vector<double> w) {
  std::vector<std::size_t> order(freq.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return freq[a] < freq[b]; });
  AtomLine out;
  for (std::size_t idx : order) {
    if (w[idx] == 0.0) continue;
    const double f = freq[idx];
    if (!out.frequencies.empty()) {
      const double last = out.frequencies.back();
      if (std::abs(f - last) <= 1e-14 * std::max({1.0, std::abs(f), std::abs(last)})) {
        out.weights.back() += w[idx];
        continue;
      }
    }
    out.frequencies.push_back(f);
    out.weights.push_back(w[idx]);
  }
  return out;
}

double chi_radius_moment(int d, double p) {
  // E |Z|^p for Z standard normal in R^d.
  return std::pow(2.0, 0.5 * p) * std::exp(std::lgamma(0.5 * (d + p)) - std::lgamma(0.5 * d));
}

// E (sum_i a_i Z_i^2)^s for 1 < s < 2, through
// Q^s = (s-1)/Gamma(2-s) int_0^inf Q (1 - e^{-tQ}) t^{-s} dt.
double gaussian_quadratic_moment(const Eigen::VectorXd& a, double s) {
  auto integrand = [&](double t) {
    if (t <= 1e-100) return 0.0;
    double log_mgf = 0.0;
    for (int i = 0; i < a.size(); ++i) log_mgf -= 0.5 * std::log1p(2.0 * a[i] * t);
    double sum = 0.0;
    for (int i = 0; i < a.size(); ++i) {
      sum += a[i] * -std::expm1(log_mgf - std::log1p(2.0 * a[i] * t));
    }
    if (sum == 0.0) return 0.0;
    return sum * std::pow(t, -s);
  };
  thread_local boost::math::quadrature::tanh_sinh<double> near;
  thread_local boost::math::quadrature::exp_sinh<double> far;
  const double head = near.integrate(integrand, 0.0, 1.0, 1e-12);
  const double tail = far.integrate(integrand, 1.0, std::numeric_limits<double>::infinity(), 1e-12);
  return (s - 1.0) / std::tgamma(2.0 - s) * (head + tail);
}

// E|lambda|^p for the d-dimensional Matern spectral density
// proportional to (kappa^2 + |lambda|^2)^{-(nu + d/2)}, by radial quadrature
// after lambda = kappa tan(phi).
ExtReal matern_radial_moment(int d, double nu, double kappa, double p) {
  // Tail |lambda|^{p + d - 1 - 2 nu - d}: integrable iff p < 2 nu.
  if (!(p < 2.0 * nu)) return ExtReal::infinity();
  auto integrand = [&](double phi) {
    const double s = std::sin(phi);
    const double c = std::cos(phi);
    if (c <= 0.0) return 0.0;
    return std::pow(s, p + d - 1.0) * std::pow(c, 2.0 * nu - p - 1.0);
  };
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  const double radial = integrator.integrate(integrand, 0.0, 0.5 * std::numbers::pi, 1e-12);
  // int_0^{pi/2} sin^{d-1} cos^{2 nu - 1} = B(d/2, nu) / 2
  const double norm =
      0.5 * std::exp(std::lgamma(0.5 * d) + std::lgamma(nu) - std::lgamma(0.5 * d + nu));
  return ExtReal(std::pow(kappa, p) * radial / norm);
}

double product_radius_moment(const std::vector<BaseLine>& axes, std::size_t i, double partial, double p) {
  if (i == axes.size()) return std::pow(partial, 0.5 * p);
  return integrate_spectral(axes[i], [&](double omega) {
    return product_radius_moment(axes, i + 1, partial + omega * omega, p);
  });
}

void sample_multivariate_t(CounterRng& rng, double nu, double kappa, std::span<double> out) {
  std::gamma_distribution<double> chi2(nu, 2.0);
  const double w = chi2(rng);
  const double factor = kappa / std::sqrt(w);
  for (double& x : out) x = factor * rng.normal();
}

double axis_abs_quantile(const SpectralModel& axis, double q) {
  const double two_sided = 0.5 * (1.0 + q);
  return std::visit(
      Overloaded{
          [&](const IsotropicGaussian& g) {
            return g.scale * boost::math::quantile(boost::math::normal(), two_sided);
          },
          [&](const Matern& m) {
            const boost::math::students_t t(2.0 * m.smoothness);
            return m.scale * boost::math::quantile(t, two_sided) / std::sqrt(2.0 * m.smoothness);
          },
          [&](const OrnsteinUhlenbeck& o) { return o.rate * std::tan(0.5 * std::numbers::pi * q); },
          [&](const CosineAtoms& a) {
            double top = 0.0;
            for (const auto& f : a.frequencies) top = std::max(top, std::abs(f[0]));
            return top;
          },
          [&](const AnisotropicGaussian& a) {
            return std::sqrt(a.shape(0, 0)) * boost::math::quantile(boost::math::normal(), two_sided);
          },
          [](const auto&) -> double { throw std::logic_error("axis_abs_quantile: unsupported"); },
      },
      axis.family());
}

}  // namespace

// ---------------------------------------------------------------- MomentMatrix

ExtReal MomentMatrix::quadratic_form(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != dimension) {
    throw std::invalid_argument("quadratic_form: dimension mismatch");
  }
  double sum = 0.0;
  for (int i = 0; i < dimension; ++i) {
    for (int j = 0; j < dimension; ++j) {
      const double coeff = v[i] * v[j];
      if (coeff == 0.0) continue;
      const ExtReal& e = (*this)(i, j);
      if (e.is_infinite()) return ExtReal::infinity();
      sum += coeff * e.value();
    }
  }
  return ExtReal(std::max(0.0, sum));
}

Eigen::MatrixXd MomentMatrix::matrix() const {
  if (!finite) throw GateViolation("second spectral moment matrix is not finite");
  Eigen::MatrixXd m(dimension, dimension);
  for (int i = 0; i < dimension; ++i) {
    for (int j = 0; j < dimension; ++j) m(i, j) = (*this)(i, j).value();
  }
  return m;
}

MomentMatrix MomentMatrix::from_finite(const Eigen::MatrixXd& m) {
  MomentMatrix out;
  out.dimension = static_cast<int>(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out.entries.emplace_back(m(i, j));
  }
  out.finite = true;
  out.finite_subspace = Eigen::MatrixXd::Identity(m.rows(), m.rows());
  return out;
}

// ---------------------------------------------------------------- SpectralModel

SpectralModel::SpectralModel(SpectralFamily family, int dimension)
    : family_(std::move(family)), dimension_(dimension) {}

SpectralModel SpectralModel::isotropic_gaussian(int dimension, double scale) {
  require(dimension >= 1, "IsotropicGaussian: dimension must be positive");
  require(scale > 0.0 && std::isfinite(scale), "IsotropicGaussian: scale must be positive");
  return SpectralModel(IsotropicGaussian{scale}, dimension);
}

SpectralModel SpectralModel::matern(int dimension, double smoothness, double scale) {
  require(dimension >= 1, "Matern: dimension must be positive");
  require(smoothness > 0.5 && std::isfinite(smoothness), "Matern: smoothness must exceed 1/2");
  require(scale > 0.0 && std::isfinite(scale), "Matern: scale must be positive");
  return SpectralModel(Matern{smoothness, scale}, dimension);
}

SpectralModel SpectralModel::ornstein_uhlenbeck(int dimension, double rate) {
  require(dimension >= 1, "OrnsteinUhlenbeck: dimension must be positive");
  require(rate > 0.0 && std::isfinite(rate), "OrnsteinUhlenbeck: rate must be positive");
  return SpectralModel(OrnsteinUhlenbeck{rate}, dimension);
}

SpectralModel SpectralModel::cosine_atoms(std::vector<std::vector<double>> frequencies,
                                          std::vector<double> weights) {
  require(!frequencies.empty(), "CosineAtoms: no atoms");
  require(frequencies.size() == weights.size(), "CosineAtoms: frequency/weight count mismatch");
  const std::size_t d = frequencies.front().size();
  require(d >= 1, "CosineAtoms: empty frequency vector");
  double total = 0.0;
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    require(frequencies[k].size() == d, "CosineAtoms: inconsistent frequency dimensions");
    for (double x : frequencies[k]) require(std::isfinite(x), "CosineAtoms: non-finite frequency");
    require(weights[k] >= 0.0 && std::isfinite(weights[k]), "CosineAtoms: negative weight");
    total += weights[k];
  }
  require(std::abs(total - 1.0) <= 1e-12, "CosineAtoms: weights must sum to 1");
  // Symmetry: the mass at lambda equals the mass at -lambda.
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    double here = 0.0;
    double mirrored = 0.0;
    for (std::size_t j = 0; j < frequencies.size(); ++j) {
      bool same = true;
      bool opposite = true;
      for (std::size_t i = 0; i < d; ++i) {
        const double tol = 1e-12 * std::max(1.0, std::abs(frequencies[k][i]));
        same = same && std::abs(frequencies[j][i] - frequencies[k][i]) <= tol;
        opposite = opposite && std::abs(frequencies[j][i] + frequencies[k][i]) <= tol;
      }
      if (same) here += weights[j];
      if (opposite) mirrored += weights[j];
    }
    require(std::abs(here - mirrored) <= 1e-12, "CosineAtoms: atoms must come in +/- pairs of equal weight");
  }
  return SpectralModel(CosineAtoms{std::move(frequencies), std::move(weights)}, static_cast<int>(d));
}

SpectralModel SpectralModel::anisotropic_gaussian(const Eigen::MatrixXd& shape) {
  require(shape.rows() >= 1 && shape.rows() == shape.cols(), "AnisotropicGaussian: shape must be square");
  require(shape.allFinite(), "AnisotropicGaussian: non-finite shape entry");
  require((shape - shape.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, shape.cwiseAbs().maxCoeff()),
          "AnisotropicGaussian: shape must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(shape);
  require(llt.info() == Eigen::Success, "AnisotropicGaussian: shape must be positive definite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shape);
  require(eig.eigenvalues().minCoeff() > 0.0, "AnisotropicGaussian: shape must be positive definite");
  SpectralModel m(AnisotropicGaussian{shape}, static_cast<int>(shape.rows()));
  m.shape_factor_ = llt.matrixL();
  return m;
}

SpectralModel SpectralModel::product_split(std::vector<SpectralModel> axes) {
  require(!axes.empty(), "ProductSplit: no axes");
  for (const auto& a : axes) {
    require(a.dimension() == 1, "ProductSplit: every axis model must be one-dimensional");
    require(!std::holds_alternative<ProductSplit>(a.family()) &&
                !std::holds_alternative<RandomPlaneWave>(a.family()),
            "ProductSplit: unsupported axis family");
  }
  const int d = static_cast<int>(axes.size());
  return SpectralModel(ProductSplit{std::move(axes)}, d);
}

SpectralModel SpectralModel::random_plane_wave(int dimension, double wavenumber) {
  require(dimension >= 2, "RandomPlaneWave: dimension must be at least 2");
  require(wavenumber > 0.0 && std::isfinite(wavenumber), "RandomPlaneWave: wavenumber must be positive");
  return SpectralModel(RandomPlaneWave{wavenumber}, dimension);
}

std::string SpectralModel::family_name() const {
  return std::visit(Overloaded{
                        [](const IsotropicGaussian&) { return std::string("isotropic_gaussian"); },
                        [](const Matern&) { return std::string("matern"); },
                        [](const OrnsteinUhlenbeck&) { return std::string("ornstein_uhlenbeck"); },
                        [](const CosineAtoms&) { return std::string("cosine_atoms"); },
                        [](const AnisotropicGaussian&) { return std::string("anisotropic_gaussian"); },
                        [](const ProductSplit&) { return std::string("product_split"); },
                        [](const RandomPlaneWave&) { return std::string("random_plane_wave"); },
                    },
                    family_);
}

LineCovariance SpectralModel::line_kernel(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != dimension_) throw std::invalid_argument("line_kernel: dimension mismatch");
  return std::visit(
      Overloaded{
          [](const IsotropicGaussian& g) -> LineCovariance { return GaussianLine{g.scale * g.scale}; },
          [](const Matern& m) -> LineCovariance { return MaternLine{m.smoothness, m.scale}; },
          [](const OrnsteinUhlenbeck& o) -> LineCovariance { return MaternLine{0.5, o.rate}; },
          [&](const CosineAtoms& a) -> LineCovariance {
            std::vector<double> projected;
            for (const auto& f : a.frequencies) {
              projected.push_back(std::inner_product(f.begin(), f.end(), v.begin(), 0.0));
            }
            return merge_atoms(std::move(projected), a.weights);
          },
          [&](const AnisotropicGaussian& a) -> LineCovariance {
            const Eigen::Map<const Eigen::VectorXd> vv(v.data(), dimension_);
            return GaussianLine{vv.dot(a.shape * vv)};
          },
          [&](const ProductSplit& p) -> LineCovariance {
            std::vector<BaseLine> factors;
            for (int i = 0; i < dimension_; ++i) factors.push_back(axis_line(p.axes[i], v[i]));
            return make_product_line(std::move(factors));
          },
          [&](const RandomPlaneWave& w) -> LineCovariance { return PlaneWaveLine{w.wavenumber, dimension_}; },
      },
      family_);
}

void SpectralModel::sample_frequency(CounterRng& rng, std::span<double> out) const {
  if (static_cast<int>(out.size()) != dimension_) throw std::invalid_argument("sample_frequency: dimension mismatch");
  std::visit(Overloaded{
                 [&](const IsotropicGaussian& g) {
                   for (double& x : out) x = g.scale * rng.normal();
                 },
                 [&](const Matern& m) { sample_multivariate_t(rng, m.smoothness, m.scale, out); },
                 [&](const OrnsteinUhlenbeck& o) { sample_multivariate_t(rng, 0.5, o.rate, out); },
                 [&](const CosineAtoms& a) {
                   const double u = rng.uniform();
                   double acc = 0.0;
                   std::size_t pick = a.weights.size() - 1;
                   for (std::size_t k = 0; k < a.weights.size(); ++k) {
                     acc += a.weights[k];
                     if (u < acc) {
                       pick = k;
                       break;
                     }
                   }
                   std::copy(a.frequencies[pick].begin(), a.frequencies[pick].end(), out.begin());
                 },
                 [&](const AnisotropicGaussian&) {
                   Eigen::VectorXd z(dimension_);
                   for (int i = 0; i < dimension_; ++i) z[i] = rng.normal();
                   const Eigen::VectorXd x = shape_factor_ * z;
                   for (int i = 0; i < dimension_; ++i) out[i] = x[i];
                 },
                 [&](const ProductSplit& p) {
                   for (int i = 0; i < dimension_; ++i) p.axes[i].sample_frequency(rng, out.subspan(i, 1));
                 },
                 [&](const RandomPlaneWave& w) {
                   double n2 = 0.0;
                   do {
                     n2 = 0.0;
                     for (double& x : out) {
                       x = rng.normal();
                       n2 += x * x;
                     }
                   } while (n2 == 0.0);
                   const double f = w.wavenumber / std::sqrt(n2);
                   for (double& x : out) x *= f;
                 },
             },
             family_);
}

double SpectralModel::spectral_radius_quantile(double q) const {
  require(q > 0.0 && q < 1.0, "spectral_radius_quantile: q must lie in (0, 1)");
  const double d = dimension_;
  return std::visit(
      Overloaded{
          [&](const IsotropicGaussian& g) {
            return g.scale * std::sqrt(boost::math::quantile(boost::math::chi_squared(d), q));
          },
          [&](const Matern& m) {
            const boost::math::fisher_f f(d, 2.0 * m.smoothness);
            return m.scale * std::sqrt(d / (2.0 * m.smoothness) * boost::math::quantile(f, q));
          },
          [&](const OrnsteinUhlenbeck& o) {
            const boost::math::fisher_f f(d, 1.0);
            return o.rate * std::sqrt(d * boost::math::quantile(f, q));
          },
          [&](const CosineAtoms& a) {
            double top = 0.0;
            for (const auto& f : a.frequencies) top = std::max(top, norm_of(f));
            return top;
          },
          [&](const AnisotropicGaussian& a) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.shape);
            return std::sqrt(eig.eigenvalues().maxCoeff() *
                             boost::math::quantile(boost::math::chi_squared(d), q));
          },
          [&](const ProductSplit& p) {
            double s = 0.0;
            for (const auto& axis : p.axes) {
              const double r = axis_abs_quantile(axis, q);
              s += r * r;
            }
            return std::sqrt(s);
          },
          [&](const RandomPlaneWave& w) { return w.wavenumber; },
      },
      family_);
}

// ---------------------------------------------------------------- free functions

double covariance(const SpectralModel& model, std::span<const double> t) {
  if (static_cast<int>(t.size()) != model.dimension()) throw std::invalid_argument("covariance: dimension mismatch");
  const double norm = norm_of(t);
  return std::visit(
      Overloaded{
          [&](const IsotropicGaussian& g) { return std::exp(-0.5 * g.scale * g.scale * norm * norm); },
          [&](const Matern& m) { return line_covariance(MaternLine{m.smoothness, m.scale}, norm); },
          [&](const OrnsteinUhlenbeck& o) { return std::exp(-o.rate * norm); },
          [&](const CosineAtoms& a) {
            double r = 0.0;
            for (std::size_t k = 0; k < a.weights.size(); ++k) {
              r += a.weights[k] * std::cos(std::inner_product(t.begin(), t.end(), a.frequencies[k].begin(), 0.0));
            }
            return r;
          },
          [&](const AnisotropicGaussian& a) {
            const Eigen::Map<const Eigen::VectorXd> tt(t.data(), model.dimension());
            return std::exp(-0.5 * tt.dot(a.shape * tt));
          },
          [&](const ProductSplit& p) {
            double r = 1.0;
            for (int i = 0; i < model.dimension(); ++i) r *= covariance(p.axes[i], t.subspan(i, 1));
            return r;
          },
          [&](const RandomPlaneWave& w) {
            return line_covariance(PlaneWaveLine{w.wavenumber, model.dimension()}, norm);
          },
      },
      model.family());
}

MomentMatrix lambda2_matrix(const SpectralModel& model) {
  const int d = model.dimension();
  auto isotropic = [d](ExtReal diag) {
    MomentMatrix m;
    m.dimension = d;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (diag.is_infinite()) {
          // Off-diagonal lambda_i lambda_j is not integrable either.
          m.entries.push_back(ExtReal::infinity());
        } else {
          m.entries.emplace_back(i == j ? diag.value() : 0.0);
        }
      }
    }
    m.finite = diag.is_finite();
    m.finite_subspace = m.finite ? Eigen::MatrixXd::Identity(d, d) : Eigen::MatrixXd(d, 0);
    return m;
  };
  return std::visit(
      Overloaded{
          [&](const IsotropicGaussian& g) { return isotropic(ExtReal(g.scale * g.scale)); },
          [&](const Matern& m) {
            return isotropic(m.smoothness > 1.0
                                 ? ExtReal(m.scale * m.scale / (2.0 * (m.smoothness - 1.0)))
                                 : ExtReal::infinity());
          },
          [&](const OrnsteinUhlenbeck&) { return isotropic(ExtReal::infinity()); },
          [&](const CosineAtoms& a) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
            for (std::size_t k = 0; k < a.weights.size(); ++k) {
              const Eigen::Map<const Eigen::VectorXd> f(a.frequencies[k].data(), d);
              m += a.weights[k] * f * f.transpose();
            }
            return MomentMatrix::from_finite(m);
          },
          [&](const AnisotropicGaussian& a) { return MomentMatrix::from_finite(a.shape); },
          [&](const ProductSplit& p) {
            std::vector<ExtReal> diag;
            for (const auto& axis : p.axes) diag.push_back(lambda2_matrix(axis)(0, 0));
            MomentMatrix m;
            m.dimension = d;
            m.finite = true;
            for (int i = 0; i < d; ++i) {
              for (int j = 0; j < d; ++j) {
                if (i == j) {
                  m.entries.push_back(diag[i]);
                } else if (diag[i].is_infinite() || diag[j].is_infinite()) {
                  m.entries.push_back(ExtReal::infinity());
                } else {
                  m.entries.emplace_back(0.0);
                }
              }
              if (diag[i].is_infinite()) m.finite = false;
            }
            std::vector<int> finite_axes;
            for (int i = 0; i < d; ++i) {
              if (diag[i].is_finite()) finite_axes.push_back(i);
            }
            m.finite_subspace = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(finite_axes.size()));
            for (std::size_t c = 0; c < finite_axes.size(); ++c) {
              m.finite_subspace(finite_axes[c], static_cast<Eigen::Index>(c)) = 1.0;
            }
            return m;
          },
          [&](const RandomPlaneWave& w) { return isotropic(ExtReal(w.wavenumber * w.wavenumber / d)); },
      },
      model.family());
}

ExtReal directional_lambda2(const SpectralModel& model, std::span<const double> v) {
  if (std::abs(norm_of(v) - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("directional_lambda2: direction must be a unit vector");
  }
  return line_lambda2(model.line_kernel(v));
}

ExtReal moment_2_plus_delta(const SpectralModel& model, double delta) {
  if (!(delta > 0.0 && delta < 2.0)) throw std::invalid_argument("moment_2_plus_delta: delta must lie in (0, 2)");
  const double p = 2.0 + delta;
  const int d = model.dimension();
  return std::visit(
      Overloaded{
          [&](const IsotropicGaussian& g) { return ExtReal(std::pow(g.scale, p) * chi_radius_moment(d, p)); },
          [&](const Matern& m) { return matern_radial_moment(d, m.smoothness, m.scale, p); },
          [&](const OrnsteinUhlenbeck& o) { return matern_radial_moment(d, 0.5, o.rate, p); },
          [&](const CosineAtoms& a) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.weights.size(); ++k) s += a.weights[k] * std::pow(norm_of(a.frequencies[k]), p);
            return ExtReal(s);
          },
          [&](const AnisotropicGaussian& a) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.shape);
            return ExtReal(gaussian_quadratic_moment(eig.eigenvalues(), 0.5 * p));
          },
          [&](const ProductSplit& prod) {
            std::vector<BaseLine> axes;
            for (const auto& axis : prod.axes) {
              const BaseLine line = axis_line(axis, 1.0);
              if (line_absolute_moment(std::visit([](const auto& k) -> LineCovariance { return k; }, line), p)
                      .is_infinite()) {
                return ExtReal::infinity();
              }
              axes.push_back(line);
            }
            return ExtReal(product_radius_moment(axes, 0, 0.0, p));
          },
          [&](const RandomPlaneWave& w) { return ExtReal(std::pow(w.wavenumber, p)); },
      },
      model.family());
}

// ---------------------------------------------------------------- DirectionalSpectrum

DirectionalSpectrum::DirectionalSpectrum(SpectralModel model, std::vector<double> v)
    : model_(std::move(model)), v_(std::move(v)) {
  if (static_cast<int>(v_.size()) != model_.dimension()) {
    throw std::invalid_argument("DirectionalSpectrum: dimension mismatch");
  }
  if (std::abs(norm_of(v_) - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("DirectionalSpectrum: direction must be a unit vector");
  }
  kernel_ = model_.line_kernel(v_);
  lambda2_ = line_lambda2(kernel_);
}

double DirectionalSpectrum::covariance(double tau) const { return lag_values(kernel_, tau).r; }

double DirectionalSpectrum::derivative(double tau) const { return lag_values(kernel_, tau).dr; }

LagValues DirectionalSpectrum::lag(double tau) const { return lag_values(kernel_, tau); }

ExtReal DirectionalSpectrum::moment_2_plus_delta(double delta) const {
  if (!(delta > 0.0 && delta < 2.0)) throw std::invalid_argument("moment_2_plus_delta: delta must lie in (0, 2)");
  return line_absolute_moment(kernel_, 2.0 + delta);
}

double DirectionalSpectrum::scale() const { return line_scale(kernel_); }

double DirectionalSpectrum::finite_lambda2() const {
  if (lambda2_.is_infinite()) throw GateViolation("directional second spectral moment is infinite");
  return lambda2_.value();
}

double theta(const DirectionalSpectrum& spec, double tau) {
  spec.finite_lambda2();
  return spec.lag(tau).theta;
}

double theta_derivative(const DirectionalSpectrum& spec, double tau) {
  spec.finite_lambda2();
  return spec.lag(tau).dtheta;
}

ExtReal geman_integral(const DirectionalSpectrum& spec, double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("geman_integral: a must be positive");
  spec.finite_lambda2();
  auto g = [&](double tau) { return 2.0 * spec.lag(tau).dtheta / (tau * tau); };
  const double upper = 2.0 * a;
  const double tau0 = std::min(1e-3 / spec.scale(), 0.5 * upper);

  // Near zero: power-law extrapolation from a log-log slope.
  const double g1 = g(tau0);
  const double g2 = g(0.5 * tau0);
  double head = 0.0;
  if (g1 > 0.0 && g2 > 0.0) {
    const double slope = std::log(g1 / g2) / std::numbers::ln2;
    if (slope <= -1.0) return ExtReal::infinity();
    head = g1 * tau0 / (slope + 1.0);
  }
  const double body =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, tau0, upper, 15, 1e-10);
  return ExtReal(std::max(0.0, head + body));
}

double fitted_sine_gap_constant(double delta, double upper, std::size_t grid) {
  if (!(delta > 0.0) || !(upper > 0.0) || grid == 0) throw std::invalid_argument("fitted_sine_gap_constant: bad arguments");
  double best = 0.0;
  for (std::size_t j = 1; j <= grid; ++j) {
    const double u = upper * static_cast<double>(j) / static_cast<double>(grid);
    best = std::max(best, sine_gap(u) / std::pow(u, 1.0 + delta));
  }
  return best;
}

}  // namespace levelset
