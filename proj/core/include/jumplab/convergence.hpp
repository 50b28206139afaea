#pragma once

#include <functional>
#include <string>
#include <vector>

#include "jumplab/chain.hpp"
#include "jumplab/operators.hpp"

namespace jumplab {

/// A family {J_n} indexed by `index_set` with a limit J and bounds claimed uniform in n.
struct KernelSequenceSpec {
  KernelSpec limit;
  std::function<KernelSpec(double index)> member;
  std::vector<double> index_set;
  KernelBounds shared_bounds;
  /// Spatial period (along x_1) of member n's oscillation; infinite when none.
  std::function<double(double index)> wavelength;
  std::string description;

  /// J_n(x, y) = J(x, y) (1 + a sin(omega_n (x_1 + y_1))), |a| < 1, index = omega_n.
  static KernelSequenceSpec oscillatory(const KernelSpec& limit, double amplitude, std::vector<double> omegas);
  /// J_n = J for every n.
  static KernelSequenceSpec constant(const KernelSpec& limit, std::vector<double> indices);
};

struct UicRow {
  double eta = 0.0;
  double far_tail = 0.0;     ///< sup_{n, x} int_{|y - x| >= 1/eta} J_n(x, y) dy
  double near_moment = 0.0;  ///< sup_{n, x} int_{|y - x| <= eta} |y - x|^2 J_n(x, y) dy
};

struct UicReport {
  std::vector<UicRow> rows;
  bool far_decreasing = false;
  bool near_decreasing = false;
  double far_final_ratio = 0.0;   ///< last / first
  double near_final_ratio = 0.0;
  bool passed = false;  ///< both columns decreasing with final < 10% of first
  std::string note;
};

UicReport verify_uic(const KernelSequenceSpec& seq, const std::vector<double>& eta_grid,
                     const std::vector<Point>& x_samples, const QuadratureOptions& opts = {});

/// A pair function with compact support [x_lo, x_hi] x [y_lo, y_hi] (d = 1).
struct TestFunction {
  std::string name;
  std::function<double(double x, double y)> psi;
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
};

/// exp(-1 / (1 - ((x - c) / w)^2)) on |x - c| < w.
double bump(double x, double center, double width);

/// Tensor bumps psi(x, y) = b(x; c - w/2, w) b(y; c + w/2, w), c = pi/12, for w in {1, 1/4, 1/8}.
std::vector<TestFunction> default_test_functions();

struct WeakProbeRow {
  std::string function;
  std::vector<double> member_values;  ///< int int psi J_n 1_{eta < |y - x| < 1/eta}
  double limit_value = 0.0;
  std::vector<double> gaps;           ///< |int int psi (J_n - J) 1_{...}|
  bool decreasing = false;
  bool passed = false;                ///< decreasing and final gap <= 5% of the first
};

struct WeakProbeReport {
  double eta = 0.0;
  std::vector<double> indices;
  std::vector<WeakProbeRow> rows;
  bool passed = false;
  std::string note;
};

struct WeakProbeOptions {
  int panels = 48;  ///< Gauss panels per axis over each support interval
  int order = 16;
};

WeakProbeReport weak_convergence_probe(const KernelSequenceSpec& seq, double eta,
                                       const std::vector<TestFunction>& test_functions,
                                       const WeakProbeOptions& opts = {});

struct ErrorRow {
  double index = 0.0;
  double sup_error = 0.0;
  int resolution = 0;
  double parameter = 0.0;  ///< t or lambda
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
  bool decreasing = false;
  double final_ratio = 0.0;  ///< last / first
  bool passed = false;       ///< strictly decreasing with final < 10% of first
};

/// Lattice and compact region for the convergence experiments.
struct ConvergenceSetup {
  int n = 256;
  Point box_lo, box_hi;
  Point compact_lo, compact_hi;  ///< errors are taken over sites in this box
  ConductanceOptions conductance;  ///< its thread count also drives the per-member work
};

/// Throws ConfigError when a member has fewer than 8 cells per oscillation period.
void check_resolution(const KernelSequenceSpec& seq, int n);

/// Conservative generator for a kernel on the setup's lattice.
GeneratorMatrix build_generator(const KernelSpec& spec, const Lattice& lattice, const ConductanceOptions& opts);

ErrorTable semigroup_convergence(const KernelSequenceSpec& seq, double t, const std::function<double(const Point&)>& f,
                                 const ConvergenceSetup& setup);
ErrorTable resolvent_convergence(const KernelSequenceSpec& seq, double lambda,
                                 const std::function<double(const Point&)>& f, const ConvergenceSetup& setup);

/// Same tables from prebuilt generators (members in index order), one member per worker.
ErrorTable semigroup_convergence(const GeneratorMatrix& limit, const std::vector<const GeneratorMatrix*>& members,
                                 const std::vector<double>& indices, double t, const Eigen::VectorXd& f,
                                 const Point& compact_lo, const Point& compact_hi, int threads = 1);
ErrorTable resolvent_convergence(const GeneratorMatrix& limit, const std::vector<const GeneratorMatrix*>& members,
                                 const std::vector<double>& indices, double lambda, const Eigen::VectorXd& f,
                                 const Point& compact_lo, const Point& compact_hi, int threads = 1);

}  // namespace jumplab
