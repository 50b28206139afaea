#include "jumplab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "jumplab/errors.hpp"
#include "jumplab/rng.hpp"
#include "jumplab/statistics.hpp"

namespace jumplab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double along(const Point& u, const Point& direction) {
  double dot = 0.0;
  for (int i = 0; i < u.dim() && i < direction.dim(); ++i) dot += u[i] * direction[i];
  return std::fabs(dot);
}

double ray_wavelength(double wavelength, const Point& direction, const Point& u) {
  if (!std::isfinite(wavelength)) return kInf;
  const double c = along(u, direction);
  return c > 1e-12 ? wavelength / c : kInf;
}

Point unit_axis(int dim, int axis) {
  Point e(dim);
  e[axis] = 1.0;
  return e;
}

}  // namespace

void KernelBounds::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("kernel bounds: ") + name + " must be positive");
  };
  auto order = [](double v, const char* name) {
    if (!(v > 0.0 && v < 2.0)) throw ConfigError(std::string("kernel bounds: ") + name + " must lie in (0, 2)");
  };
  positive(kappa1, "kappa1");
  positive(kappa2, "kappa2");
  positive(kappa3, "kappa3");
  positive(kappa4, "kappa4");
  order(beta1, "beta1");
  order(beta2, "beta2");
  order(alpha, "alpha");
  if (kappa5 && !(*kappa5 >= 0.0)) throw ConfigError("kernel bounds: kappa5 must be nonnegative");
  if (beta1 == beta2 && kappa1 > kappa2)
    throw ConfigError("kernel bounds: kappa1 > kappa2 with beta1 == beta2 leaves an empty band at |x-y| = 1");
}

OrderField OrderField::constant(int dim, double value, double epsilon) {
  OrderField f;
  f.s = [value](const Point&) { return value; };
  f.epsilon = epsilon;
  f.log_lip_c = 0.0;
  f.wave_direction = unit_axis(dim, 0);
  f.description = "constant(" + std::to_string(value) + ")";
  return f;
}

OrderField OrderField::sine(int dim, double base, double amplitude, double frequency, double epsilon,
                            double log_lip_c) {
  OrderField f;
  f.s = [=](const Point& x) { return base + amplitude * std::sin(frequency * x[0]); };
  f.epsilon = epsilon;
  f.log_lip_c = log_lip_c;
  f.wavelength = frequency != 0.0 ? 2.0 * kPi / std::fabs(frequency) : kInf;
  f.wave_direction = unit_axis(dim, 0);
  std::ostringstream os;
  os << base << " + " << amplitude << " sin(" << frequency << " x1)";
  f.description = os.str();
  return f;
}

Modulation Modulation::oscillatory(int dim, double amplitude, double omega) {
  if (!(std::fabs(amplitude) < 1.0)) throw ConfigError("oscillatory modulation requires |amplitude| < 1");
  Modulation m;
  m.factor = [=](const Point& x, const Point& y) { return 1.0 + amplitude * std::sin(omega * (x[0] + y[0])); };
  m.lower = 1.0 - std::fabs(amplitude);
  m.upper = 1.0 + std::fabs(amplitude);
  // along a ray the phase is omega (2 x_1 + rho u_1)
  m.wavelength = omega != 0.0 ? 2.0 * kPi / std::fabs(omega) : kInf;
  m.wave_direction = unit_axis(dim, 0);
  std::ostringstream os;
  os << "1 + " << amplitude << " sin(" << omega << " (x1 + y1))";
  m.description = os.str();
  return m;
}

KernelSpec KernelSpec::isotropic_stable(int dim, double alpha, double kappa) {
  KernelBounds b;
  b.kappa1 = kappa;
  b.kappa2 = kappa;
  b.beta1 = alpha;
  b.beta2 = alpha;
  b.kappa3 = kappa * unit_sphere_area(dim) / alpha;
  b.kappa4 = kappa;
  b.alpha = alpha;
  return isotropic_stable(dim, alpha, kappa, b);
}

KernelSpec KernelSpec::isotropic_stable(int dim, double alpha, double kappa, const KernelBounds& bounds) {
  if (dim < 1 || dim > kMaxDimension) throw ConfigError("kernel dimension must be 1, 2 or 3");
  if (!(alpha > 0.0 && alpha < 2.0)) throw ConfigError("isotropic stable kernel requires alpha in (0, 2)");
  if (!(kappa > 0.0)) throw ConfigError("isotropic stable kernel requires kappa > 0");
  return KernelSpec(dim, IsotropicStable{alpha, kappa}, bounds);
}

KernelSpec KernelSpec::variable_order(int dim, OrderField order, double intensity, double c1, double c2,
                                      const KernelBounds& bounds) {
  if (dim < 1 || dim > kMaxDimension) throw ConfigError("kernel dimension must be 1, 2 or 3");
  if (!order.s) throw ConfigError("variable-order kernel requires an order function");
  if (!(intensity > 0.0 && c1 > 0.0 && c2 > 0.0)) throw ConfigError("variable-order constants must be positive");
  if (!(order.epsilon > 0.0 && order.epsilon < 1.0)) throw ConfigError("order field epsilon must lie in (0, 1)");
  return KernelSpec(dim, VariableOrder{std::move(order), intensity, c1, c2}, bounds);
}

KernelSpec KernelSpec::modulated(const KernelSpec& base, Modulation modulation) {
  KernelBounds b = base.bounds();
  b.kappa1 *= modulation.lower;
  b.kappa2 *= modulation.upper;
  b.kappa3 *= modulation.upper;
  b.kappa4 *= modulation.lower;
  return modulated(base, std::move(modulation), b);
}

KernelSpec KernelSpec::modulated(const KernelSpec& base, Modulation modulation, const KernelBounds& bounds) {
  if (!modulation.factor) throw ConfigError("modulated kernel requires a modulation factor");
  if (!(modulation.lower >= 0.0)) throw ConfigError("modulation must be nonnegative");
  return KernelSpec(base.dimension(), Modulated{std::make_shared<const KernelSpec>(base), std::move(modulation)},
                    bounds);
}

KernelSpec KernelSpec::tabulated(std::vector<double> nodes, std::vector<double> values, const KernelBounds& bounds) {
  const std::size_t n = nodes.size();
  if (n < 2) throw ConfigError("tabulated kernel needs at least two nodes");
  if (values.size() != n * n) throw ConfigError("tabulated kernel: values must be nodes^2");
  for (std::size_t i = 1; i < n; ++i)
    if (!(nodes[i] > nodes[i - 1])) throw ConfigError("tabulated kernel: nodes must be strictly increasing");
  for (double v : values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("tabulated kernel: values must be finite and >= 0");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (values[i * n + j] + values[j * n + i]);
      values[i * n + j] = avg;
      values[j * n + i] = avg;
    }
  return KernelSpec(1, Tabulated{std::move(nodes), std::move(values)}, bounds);
}

std::string KernelSpec::family_name() const {
  return std::visit(Overloaded{[](const IsotropicStable&) { return std::string("isotropic-stable"); },
                               [](const VariableOrder&) { return std::string("variable-order"); },
                               [](const Modulated&) { return std::string("modulated"); },
                               [](const Tabulated&) { return std::string("tabulated"); }},
                    family_);
}

KernelSpec KernelSpec::with_truncation(std::optional<double> radius) const {
  if (radius && !(*radius > 0.0)) throw ConfigError("truncation radius must be positive");
  KernelSpec k = *this;
  k.truncation_ = radius;
  return k;
}

KernelSpec KernelSpec::with_bounds(const KernelBounds& bounds) const {
  KernelSpec k = *this;
  k.bounds_ = bounds;
  return k;
}

double KernelSpec::untruncated(const Point& x, const Point& y, double r) const {
  const int d = dim_;
  return std::visit(
      Overloaded{
          [&](const IsotropicStable& k) { return k.kappa * std::pow(r, -(d + k.alpha)); },
          [&](const VariableOrder& k) {
            const double s = 0.5 * (k.order.s(x) + k.order.s(y));
            return k.intensity * std::pow(r, -(d + s));
          },
          [&](const Modulated& k) { return (*k.base)(x, y) * k.modulation.factor(x, y); },
          [&](const Tabulated& k) {
            const auto& nd = k.nodes;
            const double a = x[0], b = y[0];
            if (a < nd.front() || a > nd.back() || b < nd.front() || b > nd.back()) return 0.0;
            const std::size_t n = nd.size();
            auto cell = [&](double v) {
              std::size_t i = static_cast<std::size_t>(std::upper_bound(nd.begin(), nd.end(), v) - nd.begin());
              return std::min(std::max<std::size_t>(i, 1), n - 1) - 1;
            };
            const std::size_t i = cell(a), j = cell(b);
            const double ta = (a - nd[i]) / (nd[i + 1] - nd[i]);
            const double tb = (b - nd[j]) / (nd[j + 1] - nd[j]);
            const double v00 = k.values[i * n + j], v01 = k.values[i * n + j + 1];
            const double v10 = k.values[(i + 1) * n + j], v11 = k.values[(i + 1) * n + j + 1];
            return (1 - ta) * ((1 - tb) * v00 + tb * v01) + ta * ((1 - tb) * v10 + tb * v11);
          }},
      family_);
}

double KernelSpec::operator()(const Point& x, const Point& y) const {
  const double r = distance(x, y);
  if (truncation_ && r > *truncation_) return 0.0;
  return untruncated(x, y, r);
}

std::optional<double> KernelSpec::local_order(const Point& x) const {
  return std::visit(Overloaded{[](const IsotropicStable& k) -> std::optional<double> { return k.alpha; },
                               [&](const VariableOrder& k) -> std::optional<double> { return k.order.s(x); },
                               [&](const Modulated& k) -> std::optional<double> { return k.base->local_order(x); },
                               [](const Tabulated&) -> std::optional<double> { return std::nullopt; }},
                    family_);
}

RayProfile KernelSpec::ray_profile(const Point& x, const Point& u) const {
  RayProfile p = std::visit(
      Overloaded{[](const IsotropicStable&) { return RayProfile{}; },
                 [&](const VariableOrder& k) {
                   RayProfile r;
                   r.wavelength = ray_wavelength(k.order.wavelength, k.order.wave_direction, u);
                   return r;
                 },
                 [&](const Modulated& k) {
                   RayProfile r = k.base->ray_profile(x, u);
                   r.wavelength =
                       std::fmin(r.wavelength, ray_wavelength(k.modulation.wavelength, k.modulation.wave_direction, u));
                   return r;
                 },
                 [&](const Tabulated& k) {
                   RayProfile r;
                   const double reach = u[0] > 0 ? k.nodes.back() - x[0] : x[0] - k.nodes.front();
                   r.support = std::fmax(0.0, reach);
                   return r;
                 }},
      family_);
  if (truncation_) p.support = std::fmin(p.support, *truncation_);
  return p;
}

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y) {
  if (x.dim() != spec.dimension() || y.dim() != spec.dimension())
    throw DomainError("eval_kernel: point dimension does not match the kernel");
  if (!x.finite() || !y.finite()) throw DomainError("eval_kernel: non-finite coordinates");
  if (x == y) throw DomainError("eval_kernel: the diagonal x == y is excluded");
  return spec(x, y);
}

QuadratureResult integrate_shell(int dim, const Point& x, double a, double b,
                                 const std::function<double(const Point& y, double rho)>& integrand,
                                 const std::function<RayProfile(const Point& u)>& profile,
                                 const QuadratureOptions& opts) {
  if (!(a >= 0.0) || !(b > a)) return {};
  double prev = 0.0, resolved = 0.0, far = 0.0, far_err = 0.0, change = 0.0;
  for (int level = 0; level <= opts.max_refinements; ++level) {
    const auto dirs = sphere_directions(dim, opts.angular_resolution << level);
    resolved = far = far_err = 0.0;
    for (const Direction& dir : dirs) {
      const Point& u = dir.u;
      auto g = [&](double rho) {
        const Point y = x + rho * u;
        const double w = integrand(y, rho);
        return dim == 1 ? w : w * std::pow(rho, dim - 1);
      };
      const RadialEstimate est = integrate_radial(g, a, b, profile(u), opts, level);
      resolved += dir.weight * est.resolved;
      far += dir.weight * est.far;
      far_err += dir.weight * est.far_error;
    }
    if (level > 0) {
      change = std::fabs(resolved - prev);
      if (change <= opts.rel_tol * std::fabs(resolved) + opts.abs_tol)
        return {resolved + far, change + far_err};
    }
    prev = resolved;
  }
  throw NumericError("shell quadrature did not reach the requested tolerance", resolved + far, change);
}

QuadratureResult kernel_moment(const KernelSpec& spec, const Point& x, double a, double b, int moment,
                               const QuadratureOptions& opts) {
  if (x.dim() != spec.dimension()) throw DomainError("kernel_moment: dimension mismatch");
  auto integrand = [&](const Point& y, double rho) {
    const double j = spec(x, y);
    return moment == 0 ? j : j * std::pow(rho, moment);
  };
  auto profile = [&](const Point& u) { return spec.ray_profile(x, u); };
  return integrate_shell(spec.dimension(), x, a, b, integrand, profile, opts);
}

QuadratureResult tail_mass(const KernelSpec& spec, const Point& x, double radius, const QuadratureOptions& opts) {
  if (!(radius > 0.0)) throw DomainError("tail_mass: radius must be positive");
  return kernel_moment(spec, x, radius, kInf, 0, opts);
}

KernelSpec load_tabulated_csv(std::istream& in, const KernelBounds& bounds) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("tabulated kernel CSV is empty");
  std::map<double, std::size_t> index;
  std::vector<std::array<double, 3>> triples;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::array<double, 3> t{};
    if (!(ls >> t[0] >> t[1] >> t[2])) throw ConfigError("tabulated kernel CSV: malformed row '" + line + "'");
    triples.push_back(t);
    index.emplace(t[0], 0);
    index.emplace(t[1], 0);
  }
  std::vector<double> nodes;
  for (auto& [v, i] : index) {
    i = nodes.size();
    nodes.push_back(v);
  }
  const std::size_t n = nodes.size();
  std::vector<double> values(n * n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& t : triples) values[index[t[0]] * n + index[t[1]]] = t[2];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double& v = values[i * n + j];
      if (std::isnan(v)) v = values[j * n + i];
      if (std::isnan(v)) {
        if (i == j) v = 0.0;
        else throw ConfigError("tabulated kernel CSV: missing entry for pair (" + std::to_string(nodes[i]) + ", " +
                               std::to_string(nodes[j]) + ")");
      }
    }
  return KernelSpec::tabulated(std::move(nodes), std::move(values), bounds);
}

bool BoundsReport::all_passed() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const ConditionResult& c) { return c.passed; });
}

const ConditionResult* BoundsReport::find(const std::string& name) const {
  for (const auto& c : conditions)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

class Sampler {
 public:
  Sampler(int dim, std::uint64_t seed) : dim_(dim), stream_(seed, 0x6b65726e656c) {}

  Point halton_in_cube(std::size_t index, const Point& center, double radius) const {
    static constexpr unsigned kBases[3] = {2, 3, 5};
    Point p(dim_);
    for (int i = 0; i < dim_; ++i) p[i] = center[i] + (2.0 * halton(index, kBases[i]) - 1.0) * radius;
    return p;
  }

  Point random_in_cube(const Point& center, double radius) {
    Point p(dim_);
    for (int i = 0; i < dim_; ++i) p[i] = center[i] + (2.0 * stream_.uniform() - 1.0) * radius;
    return p;
  }

  Point random_in_ball(const Point& center, double radius) {
    for (;;) {
      Point p = random_in_cube(center, radius);
      if (distance(p, center) < radius) return p;
    }
  }

  Point random_direction(std::size_t k) {
    if (dim_ == 1) return Point{k % 2 == 0 ? 1.0 : -1.0};
    for (;;) {
      Point u = random_in_cube(Point(dim_), 1.0);
      const double r = u.norm();
      if (r > 1e-3 && r <= 1.0) return u * (1.0 / r);
    }
  }

 private:
  int dim_;
  PathStream stream_;
};

std::vector<Point> sample_points(const SamplingPlan& plan, int dim, Sampler& sampler) {
  std::vector<Point> xs;
  const Point center = plan.center.dim() == dim ? plan.center : Point(dim);
  for (int i = 1; i <= plan.halton_points; ++i) xs.push_back(sampler.halton_in_cube(i, center, plan.sample_radius));
  for (int i = 0; i < plan.random_points; ++i) xs.push_back(sampler.random_in_cube(center, plan.sample_radius));
  return xs;
}

double log_spaced(double lo, double hi, int k, int count) {
  if (count <= 1) return hi;
  return lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1));
}

ConditionResult named_condition(std::string name) {
  ConditionResult c;
  c.name = std::move(name);
  return c;
}

void record(ConditionResult& c, double ratio, const Point& x, const Point& y, double value) {
  ++c.samples;
  if (std::isnan(ratio)) ratio = std::numeric_limits<double>::infinity();
  if (c.samples == 1 || ratio > c.worst_ratio) {
    c.worst_ratio = ratio;
    c.witness_x = x;
    c.witness_y = y;
    c.witness_value = value;
  }
}

void finish(ConditionResult& c) { c.passed = c.worst_ratio <= 1.0 + kBoundsTolerance; }

}  // namespace

BoundsReport verify_bounds(const KernelSpec& spec, const SamplingPlan& plan) {
  const int d = spec.dimension();
  const KernelBounds& kb = spec.bounds();
  Sampler sampler(d, plan.seed);
  const std::vector<Point> xs = sample_points(plan, d, sampler);
  const int seps = std::max(2, plan.separations_per_point);
  BoundsReport report;

  {
    ConditionResult c = named_condition("intensity_band");
    std::size_t k = 0;
    for (const Point& x : xs)
      for (int s = 0; s < seps; ++s, ++k) {
        const double rho = log_spaced(plan.min_separation, 1.0, s, seps);
        const Point y = x + rho * sampler.random_direction(k);
        const double j = spec(x, y);
        const double lower = kb.kappa1 * std::pow(rho, -(d + kb.beta1));
        const double upper = kb.kappa2 * std::pow(rho, -(d + kb.beta2));
        const double ratio = std::fmax(j > 0.0 ? lower / j : std::numeric_limits<double>::infinity(), j / upper);
        record(c, ratio, x, y, j);
      }
    finish(c);
    report.conditions.push_back(c);
  }

  {
    ConditionResult c = named_condition("tail_mass");
    const int count = std::min<int>(plan.tail_points, static_cast<int>(xs.size()));
    for (int i = 0; i < count; ++i) {
      double mass;
      try {
        mass = tail_mass(spec, xs[i], 1.0, plan.quad).value;
      } catch (const NumericError& e) {
        mass = e.partial_value();
        c.note = "quadrature did not converge; partial value used";
      }
      record(c, mass / kb.kappa3, xs[i], xs[i], mass);
    }
    finish(c);
    report.conditions.push_back(c);
  }

  const Point z0 = plan.z0.dim() == d ? plan.z0 : Point(d);
  const double ball = 3.0 * plan.r;
  std::vector<Point> ball_xs;
  for (int i = 0; i < plan.halton_points + plan.random_points; ++i) ball_xs.push_back(sampler.random_in_ball(z0, ball));

  {
    ConditionResult c = named_condition("local_lower_bound");
    std::size_t k = 0;
    for (const Point& x : ball_xs)
      for (int s = 0; s < seps; ++s, ++k) {
        const double rho = log_spaced(plan.min_separation * plan.r, 2.0 * ball, s, seps);
        const Point y = x + rho * sampler.random_direction(k);
        if (!(distance(y, z0) < ball)) continue;
        const double j = spec(x, y);
        const double need = kb.kappa4 * std::pow(rho, -(d + kb.alpha));
        record(c, j > 0.0 ? need / j : std::numeric_limits<double>::infinity(), x, y, j);
      }
    finish(c);
    report.conditions.push_back(c);
  }

  if (plan.check_defect) {
    ConditionResult c = named_condition("defect_integral");
    if (!kb.kappa5) {
      c.passed = false;
      c.note = "kappa5 not declared";
    } else {
      const int count = std::min<int>(plan.tail_points, static_cast<int>(ball_xs.size()));
      for (int i = 0; i < count; ++i) {
        const Point& x = ball_xs[i];
        auto defect = [&](const Point& y, double rho) {
          return std::fmax(0.0, kb.kappa4 * std::pow(rho, -(d + kb.alpha)) - spec(x, y));
        };
        auto profile = [&](const Point& u) {
          RayProfile p = spec.ray_profile(x, u);
          p.support = std::numeric_limits<double>::infinity();
          return p;
        };
        for (int lvl = 0; lvl < plan.defect_levels; ++lvl) {
          const double delta = std::ldexp(plan.r, -lvl);
          double value;
          try {
            value = integrate_shell(d, x, 0.0, delta, defect, profile, plan.quad).value;
          } catch (const NumericError& e) {
            value = std::numeric_limits<double>::infinity();
            c.note = "defect integral diverges";
          }
          record(c, value / (*kb.kappa5 * std::pow(delta, -kb.alpha)), x, x, value);
        }
      }
      finish(c);
    }
    report.conditions.push_back(c);
  }

  if (const auto* vo = std::get_if<KernelSpec::VariableOrder>(&spec.family())) {
    const OrderField& field = vo->order;
    ConditionResult range = named_condition("order_range");
    ConditionResult modulus = named_condition("order_modulus");
    modulus.note = "modulus taken as c / log(2 / |x - y|)";
    ConditionResult power = named_condition("order_power_ratio");
    ConditionResult band = named_condition("order_band");
    std::size_t k = 0;
    for (const Point& x : xs) {
      const double sx = field.s(x);
      const double dev = std::fmax(field.epsilon - sx, sx - (2.0 - field.epsilon));
      record(range, dev <= 0.0 ? 0.0 : 1.0 + dev, x, x, sx);
      for (int s = 0; s < seps; ++s, ++k) {
        const double rho = log_spaced(plan.min_separation, 1.0, s, seps) * (1.0 - 1e-12);
        const Point y = x + rho * sampler.random_direction(k);
        const double sy = field.s(y);
        const double ds = std::fabs(sx - sy);
        const double allowed = field.log_lip_c / std::log(2.0 / rho);
        record(modulus, allowed > 0.0 ? ds / allowed : (ds > 0.0 ? std::numeric_limits<double>::infinity() : 0.0),
               x, y, ds);
        record(power, std::exp(ds * std::fabs(std::log(rho)) - field.log_lip_c), x, y, std::pow(rho, sx - sy));
        const double j = spec(x, y);
        const double lower = vo->c1 * std::pow(rho, -(d + std::fmin(sx, sy)));
        const double upper = vo->c2 * std::pow(rho, -(d + std::fmax(sx, sy)));
        record(band, std::fmax(j > 0.0 ? lower / j : std::numeric_limits<double>::infinity(), j / upper), x, y, j);
      }
    }
    for (auto* c : {&range, &modulus, &power, &band}) {
      finish(*c);
      report.conditions.push_back(*c);
    }
  }
  return report;
}

}  // namespace jumplab
