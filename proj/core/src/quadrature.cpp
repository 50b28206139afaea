#include "jumplab/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "jumplab/errors.hpp"

namespace jumplab {
namespace {

constexpr double kPi = 3.14159265358979323846;

GaussRule compute_gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    // one more derivative evaluation at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// Panel [lo, hi] split into `pieces` equal parts, Gauss rule on each.
double panel_integral(const std::function<double(double)>& g, double lo, double hi, int pieces,
                      const GaussRule& rule) {
  const double width = (hi - lo) / pieces;
  double sum = 0.0;
  for (int p = 0; p < pieces; ++p) {
    const double a = lo + p * width;
    const double b = (p + 1 == pieces) ? hi : a + width;
    sum += gauss_integrate(g, a, b, rule);
  }
  return sum;
}

struct GeometricSum {
  double value = 0.0;
  double error = 0.0;
};

// Sums contribution(k), k = 0, 1, ..., over geometrically shrinking or
// growing panels and extrapolates the geometric remainder.
template <class Contribution>
GeometricSum geometric_series(Contribution&& contribution, int max_panels, const char* where) {
  GeometricSum out;
  double prev = 0.0, q = 0.0, q_prev = 0.0;
  double last = 0.0;
  int zero_run = 0;
  for (int k = 0; k < max_panels; ++k) {
    last = contribution(k);
    out.value += last;
    if (last == 0.0) {
      if (++zero_run >= 4) return out;
    } else {
      zero_run = 0;
    }
    if (k >= 3 && std::fabs(last) <= 1e-16 * std::fabs(out.value)) return out;
    if (k >= 1 && prev != 0.0) {
      q_prev = q;
      q = last / prev;
      // a settled ratio makes the geometric remainder accurate now
      if (k >= 3 && q > 0.0 && q < 0.999) {
        const double remainder = last * q / (1.0 - q);
        const double err = std::fabs(remainder) * std::fabs(q - q_prev) / (1.0 - q);
        if (err <= 1e-14 * std::fabs(out.value + remainder)) {
          out.value += remainder;
          out.error = err + 1e-16 * std::fabs(out.value);
          return out;
        }
      }
    }
    prev = last;
  }
  if (last == 0.0) return out;
  if (!(q > 0.0 && q < 0.999)) {
    throw NumericError(std::string("radial integral does not converge toward ") + where, out.value,
                       std::fabs(last));
  }
  const double remainder = last * q / (1.0 - q);
  out.value += remainder;
  out.error = std::fabs(remainder) * std::fabs(q - q_prev) / (1.0 - q) + 1e-16 * std::fabs(out.value);
  return out;
}

double integrate_plain(const std::function<double(double)>& g, double lo, double hi, double wavelength,
                       const QuadratureOptions& opts, int level, double* error) {
  const GaussRule& rule = gauss_legendre(opts.order);
  const int base_pieces = 1 << level;
  auto pieces_for = [&](double a, double b) {
    int pieces = base_pieces;
    if (std::isfinite(wavelength) && wavelength > 0.0) {
      const double needed = std::ceil((b - a) / wavelength);
      pieces = static_cast<int>(std::min(needed, 1e6)) * base_pieces;
      pieces = std::max(pieces, base_pieces);
    }
    return pieces;
  };
  if (lo <= 0.0) {
    const GeometricSum s = geometric_series(
        [&](int k) {
          const double b = std::ldexp(hi, -k);
          const double a = 0.5 * b;
          return panel_integral(g, a, b, pieces_for(a, b), rule);
        },
        opts.max_panels, "zero");
    if (error) *error += s.error;
    return s.value;
  }
  if (!std::isfinite(hi)) {
    const GeometricSum s = geometric_series(
        [&](int k) {
          const double a = std::ldexp(lo, k);
          const double b = 2.0 * a;
          return panel_integral(g, a, b, pieces_for(a, b), rule);
        },
        opts.max_panels, "infinity");
    if (error) *error += s.error;
    return s.value;
  }
  const int panels = std::max(1, static_cast<int>(std::ceil(std::log2(hi / lo) - 1e-12)));
  const double ratio = std::pow(hi / lo, 1.0 / panels);
  double sum = 0.0;
  double a = lo;
  for (int k = 0; k < panels; ++k) {
    const double b = (k + 1 == panels) ? hi : a * ratio;
    sum += panel_integral(g, a, b, pieces_for(a, b), rule);
    a = b;
  }
  return sum;
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
  if (order < 1 || order > 512) throw std::invalid_argument("gauss_legendre: order out of range");
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_gauss_legendre(order)).first;
  return it->second;
}

RadialEstimate integrate_radial(const std::function<double(double)>& g, double a, double b,
                                const RayProfile& profile, const QuadratureOptions& opts, int level) {
  RadialEstimate out;
  b = std::fmin(b, profile.support);
  if (!(b > a)) return out;

  const double period = profile.wavelength;
  const bool oscillatory = std::isfinite(period) && period > 0.0;
  const double switch_radius = oscillatory ? opts.oscillation_panel_cap * period
                                           : std::numeric_limits<double>::infinity();

  double err = 0.0;
  const double near_hi = std::fmin(b, switch_radius);
  if (near_hi > a) out.resolved = integrate_plain(g, a, near_hi, oscillatory ? period : 0.0, opts, level, &err);

  if (b > switch_radius) {
    const double c = std::fmax(a, switch_radius);
    const GaussRule& rule = gauss_legendre(opts.order);
    auto mean_over_period = [&](double rho) { return panel_integral(g, rho, rho + period, 2, rule) / period; };
    auto boundary_term = [&](double c0) {
      return panel_integral([&](double s) { return g(s) * (1.0 - (s - c0) / period); }, c0, c0 + period, 2,
                            rule);
    };
    double far_err = 0.0;
    out.far = integrate_plain(mean_over_period, c, b, 0.0, opts, level, &far_err) + boundary_term(c);
    if (std::isfinite(b)) out.far -= boundary_term(b);
    // residual oscillation of the period mean is O(period / c) relative
    out.far_error = far_err + std::fabs(out.far) * period / c;
  }
  out.far_error += err;
  return out;
}

std::vector<Direction> sphere_directions(int dim, int resolution) {
  std::vector<Direction> dirs;
  if (dim == 1) {
    dirs.push_back({Point{1.0}, 1.0});
    dirs.push_back({Point{-1.0}, 1.0});
    return dirs;
  }
  if (dim == 2) {
    const int m = std::max(4, resolution);
    dirs.reserve(m);
    for (int k = 0; k < m; ++k) {
      const double th = 2.0 * kPi * (k + 0.5) / m;
      dirs.push_back({Point{std::cos(th), std::sin(th)}, 2.0 * kPi / m});
    }
    return dirs;
  }
  if (dim == 3) {
    const int m = std::max(8, resolution / 4 * 2);
    const GaussRule& zr = gauss_legendre(m / 2);
    for (std::size_t i = 0; i < zr.nodes.size(); ++i) {
      const double z = zr.nodes[i];
      const double s = std::sqrt(std::fmax(0.0, 1.0 - z * z));
      for (int j = 0; j < m; ++j) {
        const double ph = 2.0 * kPi * (j + 0.5) / m;
        dirs.push_back({Point{s * std::cos(ph), s * std::sin(ph), z}, zr.weights[i] * 2.0 * kPi / m});
      }
    }
    return dirs;
  }
  throw ConfigError("sphere_directions: dimension must be 1, 2 or 3");
}

}  // namespace jumplab
