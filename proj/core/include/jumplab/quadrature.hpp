#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "jumplab/point.hpp"

namespace jumplab {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached rule of the given order (thread-safe).
const GaussRule& gauss_legendre(int order);

template <class F>
double gauss_integrate(F&& f, double a, double b, const GaussRule& rule) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * sum;
}

struct QuadratureOptions {
  int order = 20;                  ///< Gauss points per radial panel
  double rel_tol = 1e-9;           ///< relative change between refinement levels
  double abs_tol = 1e-300;
  int max_refinements = 4;         ///< refinement budget (levels beyond the first)
  int max_panels = 96;             ///< dyadic panels toward 0 or infinity
  int oscillation_panel_cap = 64;  ///< wavelengths resolved directly along a ray
  int angular_resolution = 32;     ///< directions on S^1 (S^2 uses a quarter of this per axis)
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// What the radial integrator needs to know about the integrand along a ray.
struct RayProfile {
  double support = std::numeric_limits<double>::infinity();     ///< zero beyond this radius
  double wavelength = std::numeric_limits<double>::infinity();  ///< oscillation period in the radius
};

struct RadialEstimate {
  double resolved = 0.0;   ///< part integrated with fully resolved panels
  double far = 0.0;        ///< period-averaged far field (oscillatory integrands only)
  double far_error = 0.0;  ///< estimate of the far-field error
};

/// Integrates g(rho) over [a, b] (b may be +inf, a may be 0) with dyadic
/// panels graded toward the ends, Gauss rules per panel, and geometric
/// extrapolation of the remainder toward 0 or infinity. `level` subdivides
/// every panel 2^level times.
///
/// For oscillatory integrands, the range beyond oscillation_panel_cap
/// wavelengths uses the exact identity
///   int_c^b g = int_c^b gbar + int_c^{c+P} g(s)(1-(s-c)/P) ds - [same at b],
/// with gbar(rho) the mean of g over one period starting at rho.
///
/// Throws NumericError when the integrand is not integrable at 0 or infinity.
RadialEstimate integrate_radial(const std::function<double(double)>& g, double a, double b,
                                const RayProfile& profile, const QuadratureOptions& opts, int level);

struct Direction {
  Point u;
  double weight = 0.0;
};

/// Quadrature on S^{d-1}: the two signs for d = 1, equispaced angles for
/// d = 2, Gauss(cos theta) x equispaced(phi) for d = 3. Weights sum to the
/// sphere area.
std::vector<Direction> sphere_directions(int dim, int resolution);

}  // namespace jumplab
