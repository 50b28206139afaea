#pragma once

#include <vector>

#include "jumplab/kernel.hpp"

namespace jumplab {

enum class FunctionalKind { L1, L2, L };

const char* to_string(FunctionalKind kind);

struct FunctionalValue {
  FunctionalKind kind = FunctionalKind::L1;
  Point center;
  double scale = 0.0;
  double alpha = 0.0;  ///< only meaningful for kind == L
  double value = 0.0;
  double quadrature_error = 0.0;
  bool lower_estimate = false;  ///< true when the value is a grid maximum of a supremum
};

/// L1(x, s) = int_{|x - w| >= s} J(x, w) dw.
FunctionalValue compute_L1(const KernelSpec& spec, const Point& x, double s, const QuadratureOptions& opts = {});

/// L2(x, s) = int_{|x - w| <= s} |x - w|^2 J(x, w) dw.
FunctionalValue compute_L2(const KernelSpec& spec, const Point& x, double s, const QuadratureOptions& opts = {});

/// Grid used for the suprema in L(z0, r).
struct SupremumGrid {
  int points_per_axis = 33;    ///< cube grid over B(z0, 3r); points outside the open ball are dropped
  int inner_dyadic_depth = 0;  ///< inner sup over s = r 2^{-j}, j = 0..depth
  int threads = 1;
};

/// Points of the cube grid with `points_per_axis` nodes per axis that lie in
/// the open ball B(center, radius). The center is always included.
std::vector<Point> ball_grid(const Point& center, double radius, int points_per_axis);

struct LEstimate {
  FunctionalValue total;     ///< tail_term + moment_term
  double tail_term = 0.0;    ///< sup_x L1(x, r)
  double moment_term = 0.0;  ///< sup_x sup_s s^d [s^{-2} L2(x, s)]^{(d + alpha) / alpha}
  Point tail_witness;
  Point moment_witness;
  double moment_scale = 0.0;  ///< the s attaining the moment term
  std::size_t grid_points = 0;
};

/// L(z0, r) = sup_{B(z0,3r)} L1(x, r) + sup_{B(z0,3r)} sup_{s <= r} s^d [s^{-2} L2(x, s)]^{(d+alpha)/alpha},
/// with both suprema taken over `grid`. The result is a lower estimate of the true supremum.
LEstimate compute_L(const KernelSpec& spec, const Point& z0, double r, double alpha, const SupremumGrid& grid = {},
                    const QuadratureOptions& opts = {});

/// kappa4 |S^{d-1}| (1 - 2^{-alpha}) / alpha * r^{-alpha}: the mass of kappa4 |w|^{-d-alpha}
/// over the annulus r <= |w| <= 2r, a lower bound for L(z0, r) under the local lower bound.
double exit_functional_lower_bound(int dim, double kappa4, double alpha, double r);

struct ComparabilityRow {
  double r = 0.0;
  double alpha = 0.0;  ///< min of s over the ball grid, used as the exponent in L
  double L = 0.0;
  double compensated = 0.0;  ///< L * r^{s(z0)}
  double quadrature_error = 0.0;
};

struct EnvelopeCheck {
  bool passed = true;
  double worst_ratio = 0.0;  ///< max J(x, w) / (c v^{-d - s(x)}) over samples
  double constant = 0.0;     ///< c = c2 e^{logLipC}
  std::size_t samples = 0;
};

struct ComparabilityReport {
  std::vector<ComparabilityRow> rows;
  double ratio = 0.0;  ///< max / min of the compensated column
  double threshold = 10.0;
  bool passed = false;
  EnvelopeCheck envelope;
};

/// Tabulates L(z0, r) r^{s(z0)} over rGrid for a kernel with an order field.
ComparabilityReport order_comparability(const KernelSpec& spec, const Point& z0, const std::vector<double>& r_grid,
                                        double threshold = 10.0, const SupremumGrid& grid = {},
                                        const QuadratureOptions& opts = {});

/// Checks sup_{|x-w| = v} J(x, w) <= c2 e^{logLipC} v^{-d-s(x)} for v in
/// log-spaced samples of (0, 1] and x on the ball grid.
EnvelopeCheck max_intensity_check(const KernelSpec& spec, const std::vector<Point>& xs, int scales = 24,
                                  int directions = 16);

struct DoublingFit {
  double sigma = 0.0;  ///< L1(x, lambda r) / L1(x, r) ~ lambda^{-sigma}
  double rms_residual = 0.0;
  std::vector<double> lambdas;
  std::vector<double> ratios;
};

/// Fits sigma from L1(x, lambda r) / L1(x, r) over lambda = 2^k with lambda r < 1.
DoublingFit doubling_exponent(const KernelSpec& spec, const Point& x, double r, const QuadratureOptions& opts = {});

}  // namespace jumplab
