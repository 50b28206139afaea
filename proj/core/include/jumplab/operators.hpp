#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "jumplab/chain.hpp"
#include "jumplab/pathsim.hpp"

namespace jumplab {

inline constexpr std::size_t kDenseSpectralLimit = 4096;

/// Eigen-decomposition of -A: eigenvalues ascending, eigenvectors
/// orthonormal in L^2(nu) (columns of `vectors`).
struct SpectralDecomp {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;
  double nu = 1.0;
  GeneratorMode mode = GeneratorMode::Conservative;

  /// <f, phi_i>_nu for every i.
  Eigen::VectorXd coefficients(const Eigen::VectorXd& f) const;
};

/// Dense symmetric eigensolver; CapabilityError above kDenseSpectralLimit sites.
SpectralDecomp spectral_decompose(const GeneratorMatrix& A);

/// p(t, x, y) = sum_i e^{-mu_i t} phi_i(x) phi_i(y), the density of P_t with respect to nu.
struct HeatKernelMatrix {
  double t = 0.0;
  Eigen::MatrixXd values;
};

HeatKernelMatrix heat_kernel(const SpectralDecomp& decomp, double t);

/// P_t f through the spectral representation.
Eigen::VectorXd spectral_semigroup(const SpectralDecomp& decomp, double t, const Eigen::VectorXd& f);

/// U^lambda f = sum_i <f, phi_i> / (lambda + mu_i) phi_i.
Eigen::VectorXd spectral_resolvent(const SpectralDecomp& decomp, double lambda, const Eigen::VectorXd& f);

/// h = sum_i (lambda + mu_i) e^{-mu_i t} <f, phi_i> phi_i, so that U^lambda h = P_t f.
Eigen::VectorXd semigroup_preimage(const SpectralDecomp& decomp, double lambda, double t, const Eigen::VectorXd& f);

/// P_t f by uniformization: sum_k Poisson(k; Lambda t) P^k f with P = I + A / Lambda,
/// accumulated as f + sum_k w_k (P^k f - f) and truncated once the Poisson
/// tail is below 1e-12. Exact on constants in conservative mode.
Eigen::VectorXd semigroup_apply(const GeneratorMatrix& A, double t, const Eigen::VectorXd& f);

/// (lambda I - A)^{-1} through a dense Cholesky factorization.
class Resolvent {
 public:
  Resolvent(const GeneratorMatrix& A, double lambda);

  double lambda() const noexcept { return lambda_; }
  /// u = f / lambda + (lambda - A)^{-1} (A f) / lambda; U^lambda 1 = 1 / lambda exactly
  /// in conservative mode. Throws NumericError when the residual exceeds 1e-8 ||f||.
  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;

 private:
  const GeneratorMatrix* A_;
  double lambda_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

Eigen::VectorXd resolvent(const GeneratorMatrix& A, double lambda, const Eigen::VectorXd& f);

struct ResolventIdentityReport {
  double form = 0.0;           ///< E_n(U f, g), plus <kill U f, g>_nu in killed mode
  double right_side = 0.0;     ///< <f, g> - lambda <U f, g>
  double absolute = 0.0;
  double relative = 0.0;       ///< relative to |form| + |<f, g>| + lambda |<U f, g>|
  double energy = 0.0;         ///< E_n(U f, U f) (+ kill term)
  double energy_right = 0.0;   ///< <f, U f> - lambda <U f, U f>
  double energy_relative = 0.0;
};

ResolventIdentityReport verify_resolvent_identity(const ConductanceMatrix& C, const GeneratorMatrix& A, double lambda,
                                                  const Eigen::VectorXd& f, const Eigen::VectorXd& g);

/// Nonlocal Dirichlet problem on the lattice ball {x : |x - x0| <= r}.
struct HarmonicSolution {
  Ball ball;
  Eigen::VectorXd values;
  std::vector<std::size_t> interior;
  double max_residual = 0.0;  ///< max over interior of |A h| / (sum_y q(x, y) |h(y)| + kill |h(x)|)
};

/// (A h)(x) = 0 for interior x, h = boundary outside. `boundary` is indexed by
/// site; interior entries are ignored.
HarmonicSolution solve_harmonic(const GeneratorMatrix& A, const Ball& ball, const Eigen::VectorXd& boundary);

struct MartingalePoint {
  double t = 0.0;
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  bool consistent = false;  ///< |mean - h(x0)| <= 3 stderr
};

struct MartingaleReport {
  double start_value = 0.0;
  std::vector<MartingalePoint> points;
  bool passed = false;
};

/// Monte Carlo mean of h(X_{t ^ tau}) from the ball center for each t (coupled paths).
MartingaleReport martingale_check(const GeneratorMatrix& A, const HarmonicSolution& h, const std::vector<double>& times,
                                  const McOptions& opts);

enum class PairPolicy {
  DistanceEnvelope,  ///< fit the largest |u(x) - u(y)| at each pair distance
  AllPairs,          ///< fit every pair above the noise floor
};

const char* to_string(PairPolicy policy);
PairPolicy parse_pair_policy(const std::string& name);

struct HolderOptions {
  PairPolicy policy = PairPolicy::DistanceEnvelope;
  double min_distance = 0.0;  ///< physical distance window for the fit; 0 means no bound
  double max_distance = 0.0;
};

struct HolderFit {
  double exponent = 0.0;
  double constant = 0.0;  ///< max over used pairs of |u(x) - u(y)| / |x - y|^exponent
  double residual = 0.0;  ///< RMS of the log-log regression
  std::size_t points = 0;  ///< regression points (distance classes or pairs)
  std::size_t pairs = 0;   ///< pairs considered
  std::string pair_set;
};

/// Hoelder fit of u over site pairs inside B(center, radius). Pairs with
/// |u(x) - u(y)| < 1e-12 ||u||_inf are dropped; fewer than 10 regression
/// points is an InsufficientDataError.
HolderFit holder_fit(const Lattice& lattice, const Eigen::VectorXd& u, const Point& center, double radius,
                     const HolderOptions& opts = {});

}  // namespace jumplab
