#include "jumplab/functionals.hpp"

#include <algorithm>
#include <cmath>

#include "jumplab/errors.hpp"
#include "jumplab/parallel.hpp"
#include "jumplab/statistics.hpp"

namespace jumplab {

const char* to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::L1: return "L1";
    case FunctionalKind::L2: return "L2";
    case FunctionalKind::L: return "L";
  }
  return "?";
}

FunctionalValue compute_L1(const KernelSpec& spec, const Point& x, double s, const QuadratureOptions& opts) {
  if (!(s > 0.0)) throw DomainError("compute_L1: s must be positive");
  const QuadratureResult q = tail_mass(spec, x, s, opts);
  return {FunctionalKind::L1, x, s, 0.0, q.value, q.error, false};
}

FunctionalValue compute_L2(const KernelSpec& spec, const Point& x, double s, const QuadratureOptions& opts) {
  if (!(s > 0.0)) throw DomainError("compute_L2: s must be positive");
  const QuadratureResult q = kernel_moment(spec, x, 0.0, s, 2, opts);
  return {FunctionalKind::L2, x, s, 0.0, q.value, q.error, false};
}

std::vector<Point> ball_grid(const Point& center, double radius, int points_per_axis) {
  const int d = center.dim();
  const int m = std::max(1, points_per_axis);
  std::vector<Point> out;
  out.push_back(center);
  int total = 1;
  for (int i = 0; i < d; ++i) total *= m;
  for (int idx = 0; idx < total; ++idx) {
    Point p(d);
    int rest = idx;
    for (int i = d - 1; i >= 0; --i) {
      const int k = rest % m;
      rest /= m;
      p[i] = m == 1 ? center[i] : center[i] - radius + 2.0 * radius * k / (m - 1);
    }
    if (distance(p, center) < radius && !(p == center)) out.push_back(p);
  }
  return out;
}

LEstimate compute_L(const KernelSpec& spec, const Point& z0, double r, double alpha, const SupremumGrid& grid,
                    const QuadratureOptions& opts) {
  if (!(r > 0.0 && r < 1.0)) throw DomainError("compute_L: r must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("compute_L: alpha must lie in (0, 2)");
  const int d = spec.dimension();
  const std::vector<Point> xs = ball_grid(z0, 3.0 * r, grid.points_per_axis);
  const int depth = std::max(0, grid.inner_dyadic_depth);
  const double power = (d + alpha) / alpha;

  struct Slot {
    double tail = 0.0, tail_err = 0.0;
    double moment = 0.0, moment_err = 0.0, moment_s = 0.0;
  };
  std::vector<Slot> slots(xs.size());
  parallel_blocks(xs.size(), grid.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const FunctionalValue l1 = compute_L1(spec, xs[i], r, opts);
      slots[i].tail = l1.value;
      slots[i].tail_err = l1.quadrature_error;
      for (int j = 0; j <= depth; ++j) {
        const double s = std::ldexp(r, -j);
        const FunctionalValue l2 = compute_L2(spec, xs[i], s, opts);
        const double inner = l2.value / (s * s);
        const double term = std::pow(s, d) * std::pow(inner, power);
        if (j == 0 || term > slots[i].moment) {
          slots[i].moment = term;
          slots[i].moment_s = s;
          // first-order propagation of the L2 error through the power
          slots[i].moment_err = inner > 0.0 ? term * power * l2.quadrature_error / l2.value : 0.0;
        }
      }
    }
  });

  LEstimate out;
  out.grid_points = xs.size();
  double tail_err = 0.0, moment_err = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i == 0 || slots[i].tail > out.tail_term) {
      out.tail_term = slots[i].tail;
      out.tail_witness = xs[i];
      tail_err = slots[i].tail_err;
    }
    if (i == 0 || slots[i].moment > out.moment_term) {
      out.moment_term = slots[i].moment;
      out.moment_witness = xs[i];
      out.moment_scale = slots[i].moment_s;
      moment_err = slots[i].moment_err;
    }
  }
  out.total = {FunctionalKind::L, z0, r, alpha, out.tail_term + out.moment_term, tail_err + moment_err, true};
  return out;
}

double exit_functional_lower_bound(int dim, double kappa4, double alpha, double r) {
  return kappa4 * unit_sphere_area(dim) * (1.0 - std::pow(2.0, -alpha)) / alpha * std::pow(r, -alpha);
}

EnvelopeCheck max_intensity_check(const KernelSpec& spec, const std::vector<Point>& xs, int scales, int directions) {
  const auto* vo = std::get_if<KernelSpec::VariableOrder>(&spec.family());
  if (!vo) throw ConfigError("max_intensity_check requires a variable-order kernel");
  const int d = spec.dimension();
  EnvelopeCheck check;
  check.constant = vo->c2 * std::exp(vo->order.log_lip_c);
  const auto dirs = sphere_directions(d, directions);
  for (const Point& x : xs) {
    const double sx = vo->order.s(x);
    for (int k = 0; k < scales; ++k) {
      const double v = std::pow(1e-4, static_cast<double>(k) / std::max(1, scales - 1));
      const double allowed = check.constant * std::pow(v, -(d + sx));
      for (const Direction& dir : dirs) {
        const double ratio = spec(x, x + v * dir.u) / allowed;
        check.worst_ratio = std::fmax(check.worst_ratio, ratio);
        ++check.samples;
      }
    }
  }
  check.passed = check.worst_ratio <= 1.0 + kBoundsTolerance;
  return check;
}

ComparabilityReport order_comparability(const KernelSpec& spec, const Point& z0, const std::vector<double>& r_grid,
                                        double threshold, const SupremumGrid& grid, const QuadratureOptions& opts) {
  if (!spec.local_order(z0)) throw ConfigError("order_comparability requires a kernel with a local order");
  if (r_grid.empty()) throw ConfigError("order_comparability: empty radius grid");
  for (double r : r_grid)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("order_comparability: radii must lie in (0, 1)");
  const double s0 = *spec.local_order(z0);
  ComparabilityReport report;
  report.threshold = threshold;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const double r = r_grid[i];
    double alpha = 2.0;
    for (const Point& x : ball_grid(z0, 3.0 * r, grid.points_per_axis)) alpha = std::fmin(alpha, *spec.local_order(x));
    const LEstimate L = compute_L(spec, z0, r, alpha, grid, opts);
    ComparabilityRow row{r, alpha, L.total.value, L.total.value * std::pow(r, s0), L.total.quadrature_error};
    lo = i == 0 ? row.compensated : std::fmin(lo, row.compensated);
    hi = i == 0 ? row.compensated : std::fmax(hi, row.compensated);
    report.rows.push_back(row);
  }
  report.ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  report.passed = report.ratio <= threshold;
  if (std::holds_alternative<KernelSpec::VariableOrder>(spec.family())) {
    const double rmax = *std::max_element(r_grid.begin(), r_grid.end());
    report.envelope = max_intensity_check(spec, ball_grid(z0, 3.0 * rmax, 9));
    report.passed = report.passed && report.envelope.passed;
  }
  return report;
}

DoublingFit doubling_exponent(const KernelSpec& spec, const Point& x, double r, const QuadratureOptions& opts) {
  if (!(r > 0.0 && r < 0.5)) throw DomainError("doubling_exponent: r must lie in (0, 0.5)");
  DoublingFit fit;
  const double base = compute_L1(spec, x, r, opts).value;
  std::vector<double> lx, ly;
  for (double lambda = 1.0; lambda * r < 1.0; lambda *= 2.0) {
    const double ratio = compute_L1(spec, x, lambda * r, opts).value / base;
    fit.lambdas.push_back(lambda);
    fit.ratios.push_back(ratio);
    lx.push_back(std::log(lambda));
    ly.push_back(std::log(ratio));
  }
  if (lx.size() < 2) throw InsufficientDataError("doubling_exponent: need lambda r < 1 for at least two dyadic lambdas");
  const LinearFit lf = least_squares(lx, ly);
  fit.sigma = -lf.slope;
  fit.rms_residual = lf.rms_residual;
  return fit;
}

}  // namespace jumplab
