#pragma once

#include <functional>
#include <span>

namespace levelset {

/// Surface measure |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2).
double sphere_area(int d);

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

struct SphereIntegral {
  double value = 0.0;
  double standard_error = 0.0;  // 0 for deterministic rules
};

using SphereFunction = std::function<double(std::span<const double>)>;

/// Integral of f over the unit sphere S^{d-1} with its surface measure.
///
/// d = 1: exact two-point sum. d = 2: trapezoid rule on the circle with
/// 4096 nodes. d >= 3: 2^14 points from a randomly shifted Kronecker
/// (golden-ratio generalisation) sequence, as 16 independent shifts of 1024
/// points; the standard error is taken across shifts.
SphereIntegral integrate_sphere(int d, const SphereFunction& f);

}  // namespace levelset
