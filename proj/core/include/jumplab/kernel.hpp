#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jumplab/point.hpp"
#include "jumplab/quadrature.hpp"

namespace jumplab {

/// Declared bound constants for a jump kernel.
///
///   kappa1 |x-y|^{-d-beta1} <= J(x,y) <= kappa2 |x-y|^{-d-beta2}   for |x-y| <= 1
///   int_{|x-y|>1} J(x,y) dy <= kappa3
///   J(x,y) >= kappa4 |x-y|^{-d-alpha}                             on B(z0, 3r)
///   int_{|x-y|<=delta} K(x,y) dy <= kappa5 delta^{-alpha}          (defect form)
struct KernelBounds {
  double kappa1 = 1.0;
  double kappa2 = 1.0;
  double beta1 = 0.5;
  double beta2 = 0.5;
  double kappa3 = 1.0;
  double kappa4 = 1.0;
  double alpha = 0.5;
  std::optional<double> kappa5;

  /// Throws ConfigError when a constant is out of its admissible range.
  void validate() const;
};

/// Spatially varying stability index s(x) in (epsilon, 2 - epsilon) with a
/// logarithmic modulus |s(x) - s(y)| <= c / log(2 / |x - y|).
struct OrderField {
  std::function<double(const Point&)> s;
  double epsilon = 0.1;
  double log_lip_c = 0.0;
  /// Optional oscillation hint: s is periodic with this wavelength along
  /// `wave_direction` (a unit vector). Infinite when s is not oscillatory.
  double wavelength = std::numeric_limits<double>::infinity();
  Point wave_direction;
  std::string description;

  static OrderField constant(int dim, double value, double epsilon = 0.01);
  /// s(x) = base + amplitude * sin(frequency * x_1).
  static OrderField sine(int dim, double base, double amplitude, double frequency, double epsilon,
                         double log_lip_c);
};

/// A symmetric positive factor m(x, y) multiplying a base kernel.
struct Modulation {
  std::function<double(const Point&, const Point&)> factor;
  double lower = 1.0;  ///< inf of m
  double upper = 1.0;  ///< sup of m
  double wavelength = std::numeric_limits<double>::infinity();
  Point wave_direction;
  std::string description;

  /// m(x, y) = 1 + amplitude * sin(omega * (x_1 + y_1)), |amplitude| < 1.
  static Modulation oscillatory(int dim, double amplitude, double omega);
};

/// A symmetric jump intensity J(x, y) on R^d x R^d with its declared bounds.
///
/// Families:
///  - isotropic stable: kappa |x-y|^{-d-alpha}
///  - variable order:   intensity |x-y|^{-d-(s(x)+s(y))/2}, declared band c1, c2
///  - modulated:        base(x,y) * m(x,y)
///  - tabulated (d=1):  bilinear interpolation of a symmetric node table,
///                      zero outside the table
/// An optional truncation radius makes J vanish for |x-y| > radius.
class KernelSpec {
 public:
  struct IsotropicStable {
    double alpha;
    double kappa;
  };
  struct VariableOrder {
    OrderField order;
    double intensity;
    double c1;
    double c2;
  };
  struct Modulated {
    std::shared_ptr<const KernelSpec> base;
    Modulation modulation;
  };
  struct Tabulated {
    std::vector<double> nodes;   ///< increasing, shared by both arguments
    std::vector<double> values;  ///< row-major nodes.size()^2, symmetric
  };
  using Family = std::variant<IsotropicStable, VariableOrder, Modulated, Tabulated>;

  static KernelSpec isotropic_stable(int dim, double alpha, double kappa);
  static KernelSpec isotropic_stable(int dim, double alpha, double kappa, const KernelBounds& bounds);
  static KernelSpec variable_order(int dim, OrderField order, double intensity, double c1, double c2,
                                   const KernelBounds& bounds);
  static KernelSpec modulated(const KernelSpec& base, Modulation modulation);
  static KernelSpec modulated(const KernelSpec& base, Modulation modulation, const KernelBounds& bounds);
  /// Symmetrizes the table by averaging with its transpose.
  static KernelSpec tabulated(std::vector<double> nodes, std::vector<double> values, const KernelBounds& bounds);

  int dimension() const noexcept { return dim_; }
  const Family& family() const noexcept { return family_; }
  const KernelBounds& bounds() const noexcept { return bounds_; }
  std::optional<double> truncation() const noexcept { return truncation_; }
  std::string family_name() const;

  KernelSpec with_truncation(std::optional<double> radius) const;
  KernelSpec with_bounds(const KernelBounds& bounds) const;

  /// J(x, y) without argument validation; x != y assumed.
  double operator()(const Point& x, const Point& y) const;

  /// Order s(x) for the variable-order family (also through modulation);
  /// alpha for the stable family; nullopt otherwise.
  std::optional<double> local_order(const Point& x) const;

  /// Integration hints for the ray {x + rho u : rho > 0}.
  RayProfile ray_profile(const Point& x, const Point& u) const;

 private:
  KernelSpec(int dim, Family family, KernelBounds bounds)
      : dim_(dim), family_(std::move(family)), bounds_(bounds) {}

  double untruncated(const Point& x, const Point& y, double r) const;

  int dim_;
  Family family_;
  KernelBounds bounds_;
  std::optional<double> truncation_;
};

/// J(x, y) with validation: x == y or non-finite input is a DomainError.
double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y);

/// int_{a <= |w| < b} |w|^moment * weight(x, x + w) dw, with refinement until
/// the relative change is below opts.rel_tol. Throws NumericError (with the
/// partial value) when the refinement budget is exhausted.
QuadratureResult integrate_shell(int dim, const Point& x, double a, double b,
                                 const std::function<double(const Point& y, double rho)>& integrand,
                                 const std::function<RayProfile(const Point& u)>& profile,
                                 const QuadratureOptions& opts);

/// int_{a <= |y - x| < b} |y - x|^moment J(x, y) dy.
QuadratureResult kernel_moment(const KernelSpec& spec, const Point& x, double a, double b, int moment,
                               const QuadratureOptions& opts = {});

/// int_{|x - y| > R} J(x, y) dy.
QuadratureResult tail_mass(const KernelSpec& spec, const Point& x, double radius,
                           const QuadratureOptions& opts = {});

/// Loads (x, y, value) triples with one header line. Missing (y, x) entries
/// are filled from (x, y); present ones are averaged.
KernelSpec load_tabulated_csv(std::istream& in, const KernelBounds& bounds);

/// How sample points are chosen for bound verification. The x samples are
/// a Halton set in the cube center +- sample_radius plus seeded random points.
struct SamplingPlan {
  Point center;
  double sample_radius = 1.0;
  int halton_points = 48;
  int random_points = 48;
  int separations_per_point = 24;  ///< log-spaced |x - y| in [min_separation, 1]
  double min_separation = 1e-4;
  int tail_points = 6;             ///< x samples for the tail-mass check
  std::uint64_t seed = 1;
  // local lower bound / defect check
  Point z0;
  double r = 0.1;
  bool check_defect = false;
  int defect_levels = 6;  ///< delta = r 2^{-k}, k = 0..levels-1
  QuadratureOptions quad;
};

struct ConditionResult {
  std::string name;
  bool passed = true;
  double worst_ratio = 0.0;  ///< max over samples of (required / actual); > 1 means violated
  Point witness_x;
  Point witness_y;
  double witness_value = 0.0;
  std::size_t samples = 0;
  std::string note;
};

struct BoundsReport {
  std::vector<ConditionResult> conditions;
  bool all_passed() const;
  const ConditionResult* find(const std::string& name) const;
};

/// Sampled certificates for the declared bounds. Condition names:
///  intensity_band, tail_mass, local_lower_bound, [defect_integral],
///  and for variable order: order_range, order_modulus, order_power_ratio,
///  order_band.
BoundsReport verify_bounds(const KernelSpec& spec, const SamplingPlan& plan);

inline constexpr double kBoundsTolerance = 1e-9;

}  // namespace jumplab
