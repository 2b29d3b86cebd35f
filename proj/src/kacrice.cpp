#include "levelset/kacrice.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "levelset/errors.hpp"
#include "levelset/parallel.hpp"
#include "levelset/rng.hpp"
#include "levelset/sphere_quadrature.hpp"

namespace levelset {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2 pi)

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// E|N(mu, v)| and E max(N(mu, v), 0).
double mean_abs(double mu, double v) {
  if (v <= 0.0) return std::abs(mu);
  const double s = std::sqrt(v);
  const double a = mu / s;
  return mu * std::erf(a / std::numbers::sqrt2) + 2.0 * s * std_normal_pdf(a);
}

double mean_positive(double mu, double v) {
  if (v <= 0.0) return std::max(mu, 0.0);
  const double s = std::sqrt(v);
  const double a = mu / s;
  return mu * std_normal_cdf(a) + s * std_normal_pdf(a);
}

double crossing_weight(double y, CrossingMode mode) {
  return mode == CrossingMode::all ? std::abs(y) : std::max(y, 0.0);
}

double inner_expectation(double mu, double v, CrossingMode mode) {
  return mode == CrossingMode::all ? mean_abs(mu, v) : mean_positive(mu, v);
}

// Conditional law from the cancellation-free lag quantities of a kernel
// with continuous spectral part.
ConditionalPair continuous_pair(const LagValues& g, double lambda2, double tau, double u) {
  const double a = g.one_minus_r;
  const double b = 2.0 - a;
  const double ab = a * b;
  if (!(ab > 0.0)) throw NumericalFailure("conditional law: degenerate pair, |r(tau)| = 1");
  const double n_sigma = -0.5 * lambda2 * lambda2 * tau * tau * a - lambda2 * b * g.theta +
                         2.0 * lambda2 * tau * g.dtheta - g.dtheta * g.dtheta;
  const double n_c = n_sigma - g.d2theta * ab + a * g.dr * g.dr;
  ConditionalPair out;
  out.mean = -g.dr * u / b;
  out.variance = std::max(0.0, n_sigma / ab);
  out.covariance = std::clamp(n_c / ab, -out.variance, out.variance);
  return out;
}

double det3(const double* c0, const double* c1, const double* c2) {
  // Columns c0, c1, c2 each hold the three row entries.
  return c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1]) +
         c2[0] * (c0[1] * c1[2] - c0[2] * c1[1]);
}

// Conditional law for a purely atomic kernel. The process is a finite sum of
// independent cos/sin features, so every determinant in the Gaussian
// conditioning is a Cauchy-Binet sum of squared minors; this keeps the
// conditional variance exact (and exactly zero when the features span only
// two dimensions).
ConditionalPair atomic_pair(const AtomLine& atoms, const LagValues& g, double tau, double u) {
  struct Column {
    double weight;
    double a[3];  // rows X(0), X(tau)-X(0)-tau X'(0), X'(0)
    double b[3];  // rows X(0), X(tau)-X(0)-tau X'(tau), X'(tau)
    double dx;    // X(tau) - X(0)
  };
  std::vector<Column> cols;
  for (std::size_t k = 0; k < atoms.frequencies.size(); ++k) {
    const double om = atoms.frequencies[k];
    if (om < 0.0) continue;
    double w = atoms.weights[k];
    if (om == 0.0) {
      cols.push_back({w, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, 0.0});
      continue;
    }
    for (std::size_t j = 0; j < atoms.frequencies.size(); ++j) {
      if (std::abs(atoms.frequencies[j] + om) <= 1e-14 * std::max(1.0, om)) w += atoms.weights[j];
    }
    const double y = om * tau;
    const double vers = versine(y);
    const double sn = std::sin(y);
    const double cs = std::cos(y);
    cols.push_back({w, {1.0, -vers, 0.0}, {1.0, -vers + y * sn, -om * sn}, -vers});
    cols.push_back({w, {0.0, -sine_gap(y), om}, {0.0, y * vers - sine_gap(y), om * cs}, sn});
  }
  const std::size_t n = cols.size();
  double gram = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = cols[i].a[0] * cols[j].dx - cols[j].a[0] * cols[i].dx;
      gram += m * m * cols[i].weight * cols[j].weight;
    }
  }
  if (!(gram > 0.0)) throw NumericalFailure("conditional law: degenerate pair, |r(tau)| = 1");
  double s_aa = 0.0;
  double s_ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        const double w = cols[i].weight * cols[j].weight * cols[k].weight;
        const double da = det3(cols[i].a, cols[j].a, cols[k].a);
        const double db = det3(cols[i].b, cols[j].b, cols[k].b);
        s_aa += da * da * w;
        s_ab += da * db * w;
      }
    }
  }
  ConditionalPair out;
  out.mean = -g.dr * u / (2.0 - g.one_minus_r);
  out.variance = s_aa / gram;
  out.covariance = std::clamp(s_ab / gram, -out.variance, out.variance);
  return out;
}

ConditionalPair pair_law(const DirectionalSpectrum& spec, const LagValues& g, double tau, double u) {
  if (const auto* atoms = std::get_if<AtomLine>(&spec.kernel())) return atomic_pair(*atoms, g, tau, u);
  return continuous_pair(g, spec.finite_lambda2(), tau, u);
}

struct SingularLag {
  double tau;
  bool positive;  // r(tau) = +1 (else -1)
};

// Lags in (0, T) at which an atomic covariance returns to +/-1.
std::vector<SingularLag> find_singular_lags(const DirectionalSpectrum& spec, double length) {
  std::vector<SingularLag> out;
  const auto* atoms = std::get_if<AtomLine>(&spec.kernel());
  if (atoms == nullptr) return out;
  double top = 0.0;
  for (double w : atoms->frequencies) top = std::max(top, std::abs(w));
  if (top == 0.0) return out;

  auto gap = [&](double tau) {
    const LagValues g = spec.lag(tau);
    return std::min(g.one_minus_r, 2.0 - g.one_minus_r);
  };
  const double step = std::numbers::pi / (32.0 * top);
  const auto n = static_cast<std::size_t>(std::ceil(length / step));
  std::vector<double> grid(n + 1);
  std::vector<double> h(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    grid[i] = std::min(length, static_cast<double>(i) * step);
    h[i] = gap(grid[i]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(h[i] <= h[i - 1] && h[i] <= h[i + 1] && h[i] < 1e-2)) continue;
    auto [tau, value] = boost::math::tools::brent_find_minima(gap, grid[i - 1], grid[i + 1], 52);
    // Newton on r' = 0 to polish beyond the sqrt(eps) resolution of Brent.
    for (int it = 0; it < 4; ++it) {
      const LagValues g = spec.lag(tau);
      if (g.d2r == 0.0) break;
      const double next = tau - g.dr / g.d2r;
      if (!(next > grid[i - 1] && next < grid[i + 1])) break;
      tau = next;
    }
    value = gap(tau);
    if (value > 1e-12) continue;
    if (tau <= 0.0 || tau >= length * (1.0 - 1e-12)) continue;
    if (!out.empty() && std::abs(out.back().tau - tau) < 0.5 * step) continue;
    out.push_back({tau, spec.lag(tau).one_minus_r < 1.0});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- domains

void LevelDomain::validate() const {
  std::visit(Overloaded{
                 [](const Ball& b) {
                   if (b.center.empty()) throw std::invalid_argument("Ball: empty center");
                   if (!(b.radius > 0.0) || !std::isfinite(b.radius)) {
                     throw std::invalid_argument("Ball: radius must be positive");
                   }
                 },
                 [](const Box& b) {
                   if (b.lower.empty() || b.lower.size() != b.upper.size()) {
                     throw std::invalid_argument("Box: lower/upper dimension mismatch");
                   }
                   for (std::size_t i = 0; i < b.lower.size(); ++i) {
                     if (!(b.upper[i] > b.lower[i]) || !std::isfinite(b.upper[i] - b.lower[i])) {
                       throw std::invalid_argument("Box: every side must have positive length");
                     }
                   }
                 },
             },
             region);
  if (!std::isfinite(level)) throw std::invalid_argument("LevelDomain: level must be finite");
}

int LevelDomain::dimension() const {
  return std::visit(Overloaded{
                        [](const Ball& b) { return static_cast<int>(b.center.size()); },
                        [](const Box& b) { return static_cast<int>(b.lower.size()); },
                    },
                    region);
}

double LevelDomain::lebesgue() const {
  return std::visit(Overloaded{
                        [](const Ball& b) {
                          const int d = static_cast<int>(b.center.size());
                          return unit_ball_volume(d) * std::pow(b.radius, d);
                        },
                        [](const Box& b) {
                          double v = 1.0;
                          for (std::size_t i = 0; i < b.lower.size(); ++i) v *= b.upper[i] - b.lower[i];
                          return v;
                        },
                    },
                    region);
}

double LevelDomain::diameter() const {
  return std::visit(Overloaded{
                        [](const Ball& b) { return 2.0 * b.radius; },
                        [](const Box& b) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < b.lower.size(); ++i) {
                            s += (b.upper[i] - b.lower[i]) * (b.upper[i] - b.lower[i]);
                          }
                          return std::sqrt(s);
                        },
                    },
                    region);
}

std::string to_string(RiceMethod method) {
  switch (method) {
    case RiceMethod::sphere_quadrature:
      return "sphere-quadrature";
    case RiceMethod::gaussian_mc:
      return "gaussian-mc";
    case RiceMethod::closed_form:
      return "closed-form";
  }
  return "unknown";
}

// ---------------------------------------------------------------- F(Lambda_2)

double crofton_constant(int d) {
  if (d < 1) throw std::invalid_argument("crofton_constant: d must be positive");
  return std::tgamma(0.5 * (d + 1)) / (2.0 * std::pow(std::numbers::pi, 0.5 * (d - 1)));
}

RiceValue f_lambda2_sphere(const MomentMatrix& lambda2) {
  if (!lambda2.finite) return {ExtReal::infinity(), RiceMethod::sphere_quadrature, 0.0};
  const int d = lambda2.dimension;
  const Eigen::MatrixXd m = lambda2.matrix();
  const double c = crofton_constant(d) / std::numbers::pi;
  const SphereIntegral s = integrate_sphere(d, [&](std::span<const double> v) {
    const Eigen::Map<const Eigen::VectorXd> vv(v.data(), d);
    return std::sqrt(std::max(0.0, vv.dot(m * vv)));
  });
  return {ExtReal(c * s.value), RiceMethod::sphere_quadrature, c * s.standard_error};
}

RiceValue f_lambda2_mc(const MomentMatrix& lambda2, std::size_t n, std::uint64_t seed, std::size_t jobs) {
  if (!lambda2.finite) return {ExtReal::infinity(), RiceMethod::gaussian_mc, 0.0};
  if (n < 1000) throw std::invalid_argument("f_lambda2_mc: at least 1000 samples required");
  const int d = lambda2.dimension;
  const Eigen::MatrixXd m = lambda2.matrix();
  constexpr std::size_t kBatch = 1 << 16;
  const std::size_t batches = (n + kBatch - 1) / kBatch;
  std::vector<RunningStats> stats(batches);
  parallel_for(batches, jobs, [&](std::size_t b) {
    CounterRng rng(seed, derive_stream(StreamTag::gaussian_mc, b));
    const std::size_t count = std::min(kBatch, n - b * kBatch);
    Eigen::VectorXd z(d);
    for (std::size_t i = 0; i < count; ++i) {
      for (int j = 0; j < d; ++j) z[j] = rng.normal();
      stats[b].add(std::sqrt(std::max(0.0, z.dot(m * z))));
    }
  });
  RunningStats total;
  for (const auto& s : stats) total.merge(s);
  return {ExtReal(kInvSqrt2Pi * total.mean()), RiceMethod::gaussian_mc, kInvSqrt2Pi * total.standard_error()};
}

RiceValue expected_volume(const SpectralModel& model, const LevelDomain& domain) {
  domain.validate();
  if (domain.dimension() != model.dimension()) throw std::invalid_argument("expected_volume: dimension mismatch");
  const MomentMatrix l2 = lambda2_matrix(model);
  if (!l2.finite) return {ExtReal::infinity(), RiceMethod::closed_form, 0.0};
  const double factor = domain.lebesgue() * std::exp(-0.5 * domain.level * domain.level);
  const int d = model.dimension();

  // Isotropic Lambda_2 = lambda I has the closed form
  // sqrt(lambda) Gamma((d+1)/2) / (sqrt(pi) Gamma(d/2)).
  const Eigen::MatrixXd m = l2.matrix();
  const double diag = m(0, 0);
  if ((m - diag * Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() == 0.0) {
    const double f = std::sqrt(diag) * std::exp(std::lgamma(0.5 * (d + 1)) - std::lgamma(0.5 * d)) /
                     std::sqrt(std::numbers::pi);
    return {ExtReal(factor * f), RiceMethod::closed_form, 0.0};
  }
  const RiceValue f = f_lambda2_sphere(l2);
  return {f.value * ExtReal(factor), f.method, factor * f.standard_error};
}

ExtReal expected_crossings_1d(ExtReal lambda2, double u, double length) {
  if (!(length > 0.0)) throw std::invalid_argument("expected_crossings_1d: T must be positive");
  if (lambda2.is_infinite()) return ExtReal::infinity();
  return ExtReal(length / std::numbers::pi * std::sqrt(lambda2.value()) * std::exp(-0.5 * u * u));
}

// ---------------------------------------------------------------- regression

ConditionalPair conditional_pair(const DirectionalSpectrum& spec, double tau, double u) {
  if (!(tau > 0.0)) throw std::invalid_argument("conditional_pair: tau must be positive");
  spec.finite_lambda2();
  return pair_law(spec, spec.lag(tau), tau, u);
}

double conditional_mean_derivative(const DirectionalSpectrum& spec, double tau, double u) {
  if (!(tau > 0.0)) throw std::invalid_argument("conditional_mean_derivative: tau must be positive");
  const LagValues g = spec.lag(tau);
  const double b = 2.0 - g.one_minus_r;
  if (!(g.one_minus_r > 0.0) || !(b > 0.0)) {
    throw NumericalFailure("conditional_mean_derivative: degenerate pair, |r(tau)| = 1");
  }
  return -g.dr * u / b;
}

double conditional_variance_derivative(const DirectionalSpectrum& spec, double tau) {
  return conditional_pair(spec, tau, 0.0).variance;
}

double pair_density(const LagValues& g, double u) {
  const double a = g.one_minus_r;
  const double b = 2.0 - a;
  return std::exp(-u * u / b) / (2.0 * std::numbers::pi * std::sqrt(a * b));
}

double centered_crossing_expectation(double v1, double v2, double c, CrossingMode mode) {
  if (v1 <= 0.0 || v2 <= 0.0) return 0.0;
  const double s = std::sqrt(v1 * v2);
  const double rho = std::clamp(c / s, -1.0, 1.0);
  const double root = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  if (mode == CrossingMode::all) return 2.0 / std::numbers::pi * (root + rho * std::asin(rho)) * s;
  return (root + rho * (0.5 * std::numbers::pi + std::asin(rho))) / (2.0 * std::numbers::pi) * s;
}

double bivariate_crossing_expectation(double m1, double m2, double v1, double v2, double c, CrossingMode mode) {
  if (v1 <= 0.0) return crossing_weight(m1, mode) * inner_expectation(m2, v2, mode);
  const double s1 = std::sqrt(v1);
  const double beta = c / v1;
  const double vcond = std::max(0.0, v2 - c * c / v1);
  auto integrand = [&](double z) {
    const double y1 = m1 + s1 * z;
    const double w = crossing_weight(y1, mode);
    if (w == 0.0) return 0.0;
    return w * inner_expectation(m2 + beta * s1 * z, vcond, mode) * std_normal_pdf(z);
  };
  constexpr double kReach = 12.0;
  std::vector<double> cuts{-kReach, kReach};
  const double kink1 = -m1 / s1;
  if (std::abs(kink1) < kReach) cuts.push_back(kink1);
  if (vcond == 0.0 && beta != 0.0) {
    const double kink2 = -m2 / (beta * s1);
    if (std::abs(kink2) < kReach) cuts.push_back(kink2);
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i];
    const double hi = cuts[i + 1];
    if (mode == CrossingMode::up) lo = std::max(lo, kink1);
    if (!(hi > lo)) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 12, 1e-13);
  }
  return total;
}

// ---------------------------------------------------------------- second moment

SecondMoment second_factorial_moment_1d(const DirectionalSpectrum& spec, double u, double length,
                                        CrossingMode mode, const SecondMomentOptions& options) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("second_factorial_moment_1d: T must be positive");
  }
  if (!std::isfinite(u)) throw std::invalid_argument("second_factorial_moment_1d: level must be finite");
  const double lambda2 = spec.finite_lambda2();
  SecondMoment out;

  auto intensity = [&](double tau) {
    const LagValues g = spec.lag(tau);
    const ConditionalPair law = pair_law(spec, g, tau, u);
    const double e = u == 0.0 ? centered_crossing_expectation(law.variance, law.variance, law.covariance, mode)
                              : bivariate_crossing_expectation(law.mean, -law.mean, law.variance, law.variance,
                                                               law.covariance, mode);
    return pair_density(g, u) * e;
  };

  const std::vector<SingularLag> singular = find_singular_lags(spec, length);
  const double tau0 = std::min(1e-3 / spec.scale(), 0.25 * length);

  // Internal cross-check of the centered closed form against quadrature.
  if (u == 0.0) {
    double probe = 0.5 * length;
    for (const auto& s : singular) {
      if (std::abs(s.tau - probe) < 1e-3 * length) probe *= 0.9;
    }
    const ConditionalPair law = pair_law(spec, spec.lag(probe), probe, 0.0);
    const double closed = centered_crossing_expectation(law.variance, law.variance, law.covariance, mode);
    const double quad = bivariate_crossing_expectation(0.0, 0.0, law.variance, law.variance, law.covariance, mode);
    if (std::abs(closed - quad) > 1e-6 * std::max(closed, 1e-300) + 1e-300) {
      throw NumericalFailure("second_factorial_moment_1d: centered closed form disagrees with quadrature");
    }
  }

  // Below tau0: power law fitted on log-log samples.
  double head = 0.0;
  {
    const double j1 = intensity(tau0);
    const double j2 = intensity(0.5 * tau0);
    if (j1 > 0.0 && j2 > 0.0) {
      const double slope = std::log(j1 / j2) / std::numbers::ln2;
      if (slope <= -1.0) throw NumericalFailure("second_factorial_moment_1d: pair intensity not integrable at 0");
      head = length * j1 * tau0 / (slope + 1.0);
    }
  }

  // Above tau0: tau = e^s, split at singular lags.
  std::vector<double> cuts{tau0};
  for (const auto& s : singular) {
    if (s.tau > tau0) cuts.push_back(s.tau);
    out.singular_lags.push_back(s.tau);
  }
  cuts.push_back(length);
  auto in_log = [&](double s) {
    const double tau = std::exp(s);
    return (length - tau) * intensity(tau) * tau;
  };
  double body = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    body += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        in_log, std::log(cuts[i]), std::log(cuts[i + 1]), options.max_depth, options.relative_tolerance);
  }
  out.regular = 2.0 * (head + body);

  const double rate_all = std::sqrt(lambda2) / std::numbers::pi * std::exp(-0.5 * u * u);
  const double rate = mode == CrossingMode::all ? rate_all : 0.5 * rate_all;
  for (const auto& s : singular) {
    // X(t + tau*) = X(t): every crossing at t repeats at t + tau*.
    // X(t + tau*) = -X(t): only zero crossings repeat, with reversed sign.
    const bool repeats = s.positive || (u == 0.0 && mode == CrossingMode::all);
    if (repeats) out.singular += 2.0 * (length - s.tau) * rate;
  }
  out.value = out.regular + out.singular;
  return out;
}

}  // namespace levelset
