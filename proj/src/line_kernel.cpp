#include "levelset/line_kernel.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

namespace levelset {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

LineCovariance widen(const BaseLine& b) {
  return std::visit([](const auto& k) -> LineCovariance { return k; }, b);
}

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

// ---------------------------------------------------------------- Gaussian

LagValues gaussian_lag(const GaussianLine& g, double tau) {
  const double s2 = g.lambda2;
  const double x = 0.5 * s2 * tau * tau;
  const double e = std::exp(-x);
  LagValues out;
  out.r = e;
  out.dr = -s2 * tau * e;
  out.d2r = s2 * (2.0 * x - 1.0) * e;
  out.one_minus_r = -std::expm1(-x);
  out.theta = exp_theta(x);
  out.dtheta = s2 * tau * out.one_minus_r;
  out.d2theta = s2 * (out.one_minus_r + 2.0 * x * e);
  return out;
}

// ---------------------------------------------------------------- Matern

double matern_lambda2(const MaternLine& m) {
  return m.smoothness > 1.0 ? m.scale * m.scale / (2.0 * (m.smoothness - 1.0)) : HUGE_VAL;
}

LagValues matern_lag(const MaternLine& m, double tau) {
  const double nu = m.smoothness;
  const double kappa = m.scale;
  const double x = kappa * std::abs(tau);
  const double s = sign_of(tau);
  const bool finite_l2 = nu > 1.0;
  const double l2 = finite_l2 ? matern_lambda2(m) : 0.0;
  LagValues out;

  if (x == 0.0) {
    out.r = 1.0;
    out.dr = 0.0;
    out.d2r = finite_l2 ? -l2 : kNaN;
    out.one_minus_r = 0.0;
    out.theta = finite_l2 ? 0.0 : kNaN;
    out.dtheta = finite_l2 ? 0.0 : kNaN;
    out.d2theta = finite_l2 ? 0.0 : kNaN;
    return out;
  }

  if (nu == 0.5) {
    const double e = std::exp(-x);
    out.r = e;
    out.dr = -s * kappa * e;
    out.d2r = kappa * kappa * e;
    out.one_minus_r = -std::expm1(-x);
    out.theta = out.dtheta = out.d2theta = kNaN;
    return out;
  }

  const double c = std::pow(2.0, 1.0 - nu) / std::tgamma(nu);
  const double xn = std::pow(x, nu);
  const double k_nu = std::cyl_bessel_k(nu, x);
  const double k_nu1 = std::cyl_bessel_k(std::abs(nu - 1.0), x);
  const double k_nu2 = std::cyl_bessel_k(std::abs(nu - 2.0), x);
  out.r = std::min(1.0, c * xn * k_nu);
  out.dr = -s * c * kappa * xn * k_nu1;
  out.d2r = -c * kappa * kappa * (xn / x * k_nu1 - xn * k_nu2);
  out.one_minus_r = 1.0 - out.r;
  if (!finite_l2) {
    out.theta = out.dtheta = out.d2theta = kNaN;
    return out;
  }
  // theta and its derivatives are nonnegative; clamp rounding residue.
  out.theta = std::max(0.0, out.r - 1.0 + 0.5 * l2 * tau * tau);
  out.dtheta = s * std::max(0.0, std::abs(out.dr + l2 * tau));
  out.d2theta = std::max(0.0, out.d2r + l2);
  return out;
}

// ---------------------------------------------------------------- atoms

double atom_lambda2(const AtomLine& a) {
  double l2 = 0.0;
  for (std::size_t k = 0; k < a.frequencies.size(); ++k) {
    l2 += a.weights[k] * a.frequencies[k] * a.frequencies[k];
  }
  return l2;
}

LagValues atom_lag(const AtomLine& a, double tau) {
  LagValues out{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < a.frequencies.size(); ++k) {
    const double w = a.weights[k];
    const double om = a.frequencies[k];
    const double y = om * tau;
    const double c = std::cos(y);
    const double sn = std::sin(y);
    out.r += w * c;
    out.dr -= w * om * sn;
    out.d2r -= w * om * om * c;
    out.one_minus_r += w * versine(y);
    out.theta += w * cos_theta(y);
    out.dtheta += w * om * sine_gap(y);
    out.d2theta += w * om * om * versine(y);
  }
  return out;
}

// ---------------------------------------------------------------- plane wave

// g_mu(x) = Gamma(mu+1) (2/x)^mu J_mu(x), with g_mu(0) = 1.
double plane_wave_profile(double mu, double x) {
  if (x == 0.0) return 1.0;
  return std::tgamma(mu + 1.0) * std::pow(2.0 / x, mu) * std::cyl_bessel_j(mu, x);
}

LagValues plane_wave_lag(const PlaneWaveLine& p, double tau) {
  const double mu = 0.5 * p.dimension - 1.0;
  const double k = p.wavenumber;
  const double x = k * std::abs(tau);
  const double s = sign_of(tau);
  const double l2 = k * k / p.dimension;
  LagValues out;

  if (x < 2.0) {
    // Taylor series of r in x: c_n x^{2n}, c_0 = 1, c_n = -c_{n-1} / (4 n (n + mu)).
    double c = 1.0;
    double x2n = 1.0;  // x^{2n}
    out.r = 1.0;
    out.dr = out.d2r = out.one_minus_r = out.theta = out.dtheta = out.d2theta = 0.0;
    for (int n = 1; n <= 30; ++n) {
      c = -c / (4.0 * n * (n + mu));
      const double x2n_prev = x2n;  // x^{2n-2}
      x2n *= x * x;
      const double term = c * x2n;
      const double dterm = 2.0 * n * c * x2n_prev * x;             // d/dx
      const double d2term = 2.0 * n * (2.0 * n - 1.0) * c * x2n_prev;  // d2/dx2
      out.r += term;
      out.one_minus_r -= term;
      out.dr += dterm;
      out.d2r += d2term;
      if (n >= 2) {
        out.theta += term;
        out.dtheta += dterm;
        out.d2theta += d2term;
      }
      if (std::abs(term) < 1e-18 * std::abs(out.r) && n > 2) break;
    }
    out.dr *= s * k;
    out.dtheta *= s * k;
    out.d2r *= k * k;
    out.d2theta *= k * k;
    return out;
  }

  const double g0 = plane_wave_profile(mu, x);
  const double g1 = plane_wave_profile(mu + 1.0, x);
  const double g2 = plane_wave_profile(mu + 2.0, x);
  out.r = g0;
  out.dr = -s * k * x * g1 / (2.0 * (mu + 1.0));
  out.d2r = -k * k * (g1 / (2.0 * (mu + 1.0)) - x * x * g2 / (4.0 * (mu + 1.0) * (mu + 2.0)));
  out.one_minus_r = 1.0 - g0;
  out.theta = out.r - 1.0 + 0.5 * l2 * tau * tau;
  out.dtheta = out.dr + l2 * tau;
  out.d2theta = out.d2r + l2;
  return out;
}

// ---------------------------------------------------------------- product

double base_lambda2(const BaseLine& b) {
  return std::visit(Overloaded{
                        [](const GaussianLine& g) { return g.lambda2; },
                        [](const MaternLine& m) { return matern_lambda2(m); },
                        [](const AtomLine& a) { return atom_lambda2(a); },
                        [](const PlaneWaveLine& p) { return p.wavenumber * p.wavenumber / p.dimension; },
                    },
                    b);
}

// 1 - prod_{i in mask} r_i, via log1p when every factor is close to 1.
double one_minus_product(const std::vector<LagValues>& f, unsigned skip_mask) {
  bool near_one = true;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if ((skip_mask >> i) & 1u) continue;
    if (!(f[i].one_minus_r < 0.5)) near_one = false;
  }
  if (near_one) {
    double log_prod = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if ((skip_mask >> i) & 1u) continue;
      log_prod += std::log1p(-f[i].one_minus_r);
    }
    return -std::expm1(log_prod);
  }
  double prod = 1.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if ((skip_mask >> i) & 1u) continue;
    prod *= f[i].r;
  }
  return 1.0 - prod;
}

double product_excluding(const std::vector<LagValues>& f, unsigned skip_mask) {
  double prod = 1.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if ((skip_mask >> i) & 1u) continue;
    prod *= f[i].r;
  }
  return prod;
}

LagValues product_lag(const ProductLine& p, double tau) {
  const std::size_t n = p.factors.size();
  if (n > 16) throw std::invalid_argument("ProductLine: too many factors");
  std::vector<LagValues> f(n);
  std::vector<double> l2(n);
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = lag_values(widen(p.factors[i]), tau);
    l2[i] = base_lambda2(p.factors[i]);
    if (!std::isfinite(l2[i])) finite = false;
  }

  LagValues out;
  out.r = product_excluding(f, 0u);
  out.one_minus_r = one_minus_product(f, 0u);
  out.dr = 0.0;
  out.d2r = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned bit_i = 1u << i;
    out.dr += f[i].dr * product_excluding(f, bit_i);
    out.d2r += f[i].d2r * product_excluding(f, bit_i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      cross += f[i].dr * f[j].dr * product_excluding(f, bit_i | (1u << j));
    }
  }
  out.d2r += cross;

  if (!finite) {
    out.theta = out.dtheta = out.d2theta = kNaN;
    return out;
  }

  // theta = sum theta_i + sum_{|S| >= 2} (-1)^{|S|} prod_{i in S} (1 - r_i)
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) theta += f[i].theta;
  for (unsigned subset = 1; subset < (1u << n); ++subset) {
    const int size = std::popcount(subset);
    if (size < 2) continue;
    double term = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((subset >> i) & 1u) term *= f[i].one_minus_r;
    }
    theta += (size % 2 == 0 ? term : -term);
  }
  out.theta = theta;

  double dtheta = 0.0;
  double d2theta = cross;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned bit_i = 1u << i;
    const double others = product_excluding(f, bit_i);
    const double others_gap = one_minus_product(f, bit_i);
    dtheta += f[i].dtheta * others + l2[i] * tau * others_gap;
    d2theta += f[i].d2theta * others + l2[i] * others_gap;
  }
  out.dtheta = dtheta;
  out.d2theta = d2theta;
  return out;
}

bool base_is_trivial(const BaseLine& b) {
  return std::visit(Overloaded{
                        [](const GaussianLine& g) { return g.lambda2 == 0.0; },
                        [](const MaternLine& m) { return m.scale == 0.0; },
                        [](const AtomLine& a) {
                          return std::all_of(a.frequencies.begin(), a.frequencies.end(),
                                             [](double w) { return w == 0.0; });
                        },
                        [](const PlaneWaveLine& p) { return p.wavenumber == 0.0; },
                    },
                    b);
}

AtomLine convolve(const AtomLine& a, const AtomLine& b) {
  std::map<double, double> merged;
  for (std::size_t i = 0; i < a.frequencies.size(); ++i) {
    for (std::size_t j = 0; j < b.frequencies.size(); ++j) {
      merged[a.frequencies[i] + b.frequencies[j]] += a.weights[i] * b.weights[j];
    }
  }
  AtomLine out;
  for (const auto& [freq, w] : merged) {
    out.frequencies.push_back(freq);
    out.weights.push_back(w);
  }
  return out;
}

double absolute_moment_base(const BaseLine& b, double p) {
  return std::visit(
      Overloaded{
          [p](const GaussianLine& g) {
            return std::pow(g.lambda2, 0.5 * p) * std::pow(2.0, 0.5 * p) *
                   std::tgamma(0.5 * (p + 1.0)) / std::sqrt(std::numbers::pi);
          },
          [p](const MaternLine& m) {
            if (!(p < 2.0 * m.smoothness)) return HUGE_VAL;
            return std::pow(m.scale, p) * std::tgamma(0.5 * (1.0 + p)) *
                   std::tgamma(m.smoothness - 0.5 * p) /
                   (std::sqrt(std::numbers::pi) * std::tgamma(m.smoothness));
          },
          [p](const AtomLine& a) {
            double sum = 0.0;
            for (std::size_t k = 0; k < a.frequencies.size(); ++k) {
              sum += a.weights[k] * std::pow(std::abs(a.frequencies[k]), p);
            }
            return sum;
          },
          [p](const PlaneWaveLine& w) {
            const double d = w.dimension;
            return std::pow(w.wavenumber, p) * std::tgamma(0.5 * d) * std::tgamma(0.5 * (p + 1.0)) /
                   (std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (d + p)));
          },
      },
      b);
}

double nested_product_moment(const std::vector<BaseLine>& factors, std::size_t i, double partial,
                             double p) {
  if (i == factors.size()) return std::pow(std::abs(partial), p);
  return integrate_spectral(factors[i], [&](double omega) {
    return nested_product_moment(factors, i + 1, partial + omega, p);
  });
}

}  // namespace

double exp_theta(double x) {
  if (std::abs(x) < 0.05) {
    // sum_{k >= 2} (-x)^k / k!
    double term = 0.5 * x * x;
    double sum = term;
    for (int k = 3; k <= 14; ++k) {
      term *= -x / k;
      sum += term;
    }
    return sum;
  }
  return std::expm1(-x) + x;
}

double cos_theta(double y) {
  if (std::abs(y) < 0.5) {
    const double y2 = y * y;
    double term = y2 * y2 / 24.0;
    double sum = term;
    for (int k = 3; k <= 10; ++k) {
      term *= -y2 / ((2.0 * k) * (2.0 * k - 1.0));
      sum += term;
    }
    return sum;
  }
  return std::cos(y) - 1.0 + 0.5 * y * y;
}

double sine_gap(double y) {
  if (std::abs(y) < 0.5) {
    const double y2 = y * y;
    double term = y * y2 / 6.0;
    double sum = term;
    for (int k = 2; k <= 9; ++k) {
      term *= -y2 / ((2.0 * k + 1.0) * (2.0 * k));
      sum += term;
    }
    return sum;
  }
  return y - std::sin(y);
}

double versine(double y) {
  const double s = std::sin(0.5 * y);
  return 2.0 * s * s;
}

LineCovariance make_product_line(std::vector<BaseLine> factors) {
  std::erase_if(factors, base_is_trivial);
  if (factors.empty()) return AtomLine{{0.0}, {1.0}};
  if (factors.size() == 1) return widen(factors.front());
  const bool all_atomic = std::all_of(factors.begin(), factors.end(), [](const BaseLine& b) {
    return std::holds_alternative<AtomLine>(b);
  });
  if (all_atomic) {
    AtomLine acc = std::get<AtomLine>(factors.front());
    for (std::size_t i = 1; i < factors.size(); ++i) acc = convolve(acc, std::get<AtomLine>(factors[i]));
    return acc;
  }
  return ProductLine{std::move(factors)};
}

LagValues lag_values(const LineCovariance& kernel, double tau) {
  return std::visit(Overloaded{
                        [tau](const GaussianLine& g) { return gaussian_lag(g, tau); },
                        [tau](const MaternLine& m) { return matern_lag(m, tau); },
                        [tau](const AtomLine& a) { return atom_lag(a, tau); },
                        [tau](const PlaneWaveLine& p) { return plane_wave_lag(p, tau); },
                        [tau](const ProductLine& p) { return product_lag(p, tau); },
                    },
                    kernel);
}

double line_covariance(const LineCovariance& kernel, double tau) { return lag_values(kernel, tau).r; }

ExtReal line_lambda2(const LineCovariance& kernel) {
  const double l2 = std::visit(Overloaded{
                                   [](const ProductLine& p) {
                                     double sum = 0.0;
                                     for (const auto& f : p.factors) sum += base_lambda2(f);
                                     return sum;
                                   },
                                   [](const auto& k) { return base_lambda2(BaseLine{k}); },
                               },
                               kernel);
  return std::isfinite(l2) ? ExtReal(l2) : ExtReal::infinity();
}

ExtReal line_absolute_moment(const LineCovariance& kernel, double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("line_absolute_moment: p must be nonnegative");
  const double m = std::visit(Overloaded{
                                  [p](const ProductLine& prod) {
                                    for (const auto& f : prod.factors) {
                                      if (!std::isfinite(absolute_moment_base(f, p))) return HUGE_VAL;
                                    }
                                    return nested_product_moment(prod.factors, 0, 0.0, p);
                                  },
                                  [p](const auto& k) { return absolute_moment_base(BaseLine{k}, p); },
                              },
                              kernel);
  return std::isfinite(m) ? ExtReal(m) : ExtReal::infinity();
}

double line_scale(const LineCovariance& kernel) {
  auto base_scale = Overloaded{
      [](const GaussianLine& g) { return std::sqrt(g.lambda2); },
      [](const MaternLine& m) { return m.scale; },
      [](const AtomLine& a) {
        double top = 0.0;
        for (double w : a.frequencies) top = std::max(top, std::abs(w));
        return top;
      },
      [](const PlaneWaveLine& p) { return p.wavenumber; },
  };
  double s = std::visit(Overloaded{
                            [&](const ProductLine& p) {
                              double top = 0.0;
                              for (const auto& f : p.factors) top = std::max(top, std::visit(base_scale, f));
                              return top;
                            },
                            [&](const auto& k) { return base_scale(k); },
                        },
                        kernel);
  return s > 0.0 ? s : 1.0;
}

bool is_atomic(const LineCovariance& kernel) { return std::holds_alternative<AtomLine>(kernel); }

double integrate_spectral(const BaseLine& factor, const std::function<double(double)>& g) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  constexpr double kTol = 1e-10;
  constexpr double kHalfPi = 0.5 * std::numbers::pi;
  return std::visit(
      Overloaded{
          [&](const GaussianLine& gl) {
            const double sigma = std::sqrt(gl.lambda2);
            auto f = [&](double t) {
              const double z = std::tan(t);
              const double c = std::cos(t);
              const double w = std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * c * c);
              return w == 0.0 ? 0.0 : g(sigma * z) * w;
            };
            return integrator.integrate(f, -kHalfPi, kHalfPi, kTol);
          },
          [&](const MaternLine& m) {
            const double norm = std::tgamma(m.smoothness + 0.5) /
                                (std::sqrt(std::numbers::pi) * std::tgamma(m.smoothness));
            auto f = [&](double t) {
              const double w = norm * std::pow(std::cos(t), 2.0 * m.smoothness - 1.0);
              return w == 0.0 ? 0.0 : g(m.scale * std::tan(t)) * w;
            };
            return integrator.integrate(f, -kHalfPi, kHalfPi, kTol);
          },
          [&](const AtomLine& a) {
            double sum = 0.0;
            for (std::size_t k = 0; k < a.frequencies.size(); ++k) sum += a.weights[k] * g(a.frequencies[k]);
            return sum;
          },
          [&](const PlaneWaveLine& p) {
            const double d = p.dimension;
            const double norm =
                std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (d - 1.0)) / std::tgamma(0.5 * d);
            auto f = [&](double t) {
              return g(p.wavenumber * std::sin(t)) * std::pow(std::cos(t), d - 2.0) / norm;
            };
            return integrator.integrate(f, -kHalfPi, kHalfPi, kTol);
          },
      },
      factor);
}

}  // namespace levelset
