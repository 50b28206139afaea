#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>

#include "jumplab/kernel.hpp"
#include "jumplab/lattice.hpp"

namespace jumplab {

/// How conductances between touching cells are produced.
enum class AdjacentPolicy {
  Literal,        ///< cell-pair integral as defined; DivergentEntryError when it diverges
  MomentMatched,  ///< axis-adjacent pairs match the truncated second moment
};

enum class GeneratorMode { Killed, Conservative };

const char* to_string(AdjacentPolicy policy);
const char* to_string(GeneratorMode mode);
AdjacentPolicy parse_adjacent_policy(const std::string& name);
GeneratorMode parse_generator_mode(const std::string& name);

struct ConductanceOptions {
  /// Gauss points per axis per cell for separated pairs within 32 cells;
  /// at most 3 up to 160 cells and at most 2 beyond.
  int quad_order = 4;
  AdjacentPolicy policy = AdjacentPolicy::Literal;
  int touching_depth = 0;  ///< subdivision levels for touching pairs; 0 picks 44 (d=1) or 4 (d=2)
  int touching_order = 0;  ///< Gauss order for separated sub-pairs of touching cells; 0 picks 8 (d=1) or 4 (d=2)
  int threads = 1;
  QuadratureOptions quad;   ///< moment-matched second moments
};

/// C(x, y) = n^{2d} int_{Q_x} int_{Q_y} J, dense symmetric with zero diagonal.
struct ConductanceMatrix {
  Lattice lattice;
  Eigen::MatrixXd entries;
  AdjacentPolicy policy = AdjacentPolicy::Literal;
};

ConductanceMatrix build_conductances(const KernelSpec& spec, const Lattice& lattice,
                                     const ConductanceOptions& opts = {});

/// Rates q(x, y) = 2 C(x, y) n^{-d} for x != y, an outward kill rate, and the
/// diagonal q(x, x) = -(sum_{y != x} q(x, y) + kill(x)).
/// Convention: E(f, g) = <-A f, g>_nu.
class GeneratorMatrix {
 public:
  GeneratorMatrix() = default;

  /// Builds from off-diagonal rates (the diagonal of `rates` is ignored and zeroed).
  static GeneratorMatrix from_rates(Lattice lattice, Eigen::MatrixXd rates, Eigen::VectorXd kill, GeneratorMode mode);

  const Lattice& lattice() const noexcept { return lattice_; }
  GeneratorMode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(rates_.rows()); }
  const Eigen::MatrixXd& rates() const noexcept { return rates_; }
  const Eigen::VectorXd& kill() const noexcept { return kill_; }
  const Eigen::VectorXd& diagonal() const noexcept { return diagonal_; }
  double rate(std::size_t x, std::size_t y) const { return rates_(x, y); }
  double total_rate(std::size_t x) const { return -diagonal_(x); }
  double max_total_rate() const { return (-diagonal_).maxCoeff(); }

  /// (A f)(x) = sum_y q(x, y) (f(y) - f(x)) - kill(x) f(x). Exactly 0 on constants when kill = 0.
  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;

  /// Off-diagonal rates summed in index order plus the diagonal: 0 in
  /// conservative mode, -kill(x) in killed mode.
  Eigen::VectorXd row_sum() const;

  /// Full matrix including the diagonal.
  Eigen::MatrixXd dense() const;

 private:
  Lattice lattice_;
  Eigen::MatrixXd rates_;
  Eigen::VectorXd kill_;
  Eigen::VectorXd diagonal_;
  Eigen::VectorXd off_sum_;
  GeneratorMode mode_ = GeneratorMode::Conservative;
};

/// 2 int_{y outside the cell box, rmin <= |y - x| < rmax} J(x, y) dy.
double outside_box_mass(const KernelSpec& spec, const Point& x, const Point& lo, const Point& hi, double rmin,
                        double rmax, const QuadratureOptions& opts = {});

GeneratorMatrix assemble_generator(const ConductanceMatrix& C, GeneratorMode mode, const KernelSpec& spec,
                                   const QuadratureOptions& opts = {});

/// sum over ordered site pairs of (f(x) - f(y)) (g(x) - g(y)) C(x, y) n^{-2d}.
double dirichlet_form(const ConductanceMatrix& C, const Eigen::VectorXd& f, const Eigen::VectorXd& g);

/// <f, g>_nu = nu sum_x f(x) g(x).
double inner_product(const Lattice& lattice, const Eigen::VectorXd& f, const Eigen::VectorXd& g);

/// Writes nonzero entries as "row,col,value" with a comment header line
/// recording n, box, mode and adjacent policy. The generator includes its diagonal.
void write_triples(std::ostream& out, const ConductanceMatrix& C);
void write_triples(std::ostream& out, const GeneratorMatrix& A, AdjacentPolicy policy);

}  // namespace jumplab
