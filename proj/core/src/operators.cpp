#include "jumplab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "jumplab/errors.hpp"
#include "jumplab/parallel.hpp"
#include "jumplab/statistics.hpp"

namespace jumplab {

Eigen::VectorXd SpectralDecomp::coefficients(const Eigen::VectorXd& f) const {
  return nu * (vectors.transpose() * f);
}

SpectralDecomp spectral_decompose(const GeneratorMatrix& A) {
  if (A.size() > kDenseSpectralLimit) {
    std::ostringstream os;
    os << "spectral_decompose: " << A.size() << " sites exceed the dense limit of " << kDenseSpectralLimit
       << "; use semigroup_apply or the resolvent solver instead";
    throw CapabilityError(os.str());
  }
  const Eigen::MatrixXd M = -A.dense();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
  if (solver.info() != Eigen::Success) throw NumericError("spectral_decompose: eigensolver failed", 0.0);
  SpectralDecomp d;
  d.nu = A.lattice().nu();
  d.mode = A.mode();
  d.eigenvalues = solver.eigenvalues();
  d.vectors = solver.eigenvectors() / std::sqrt(d.nu);
  return d;
}

HeatKernelMatrix heat_kernel(const SpectralDecomp& decomp, double t) {
  if (!(t > 0.0)) throw ConfigError("heat_kernel: t must be positive");
  const Eigen::VectorXd decay = (-t * decomp.eigenvalues).array().exp();
  HeatKernelMatrix p;
  p.t = t;
  p.values = decomp.vectors * decay.asDiagonal() * decomp.vectors.transpose();
  return p;
}

Eigen::VectorXd spectral_semigroup(const SpectralDecomp& decomp, double t, const Eigen::VectorXd& f) {
  const Eigen::VectorXd c = decomp.coefficients(f);
  return decomp.vectors * (c.array() * (-t * decomp.eigenvalues).array().exp()).matrix();
}

Eigen::VectorXd spectral_resolvent(const SpectralDecomp& decomp, double lambda, const Eigen::VectorXd& f) {
  const Eigen::VectorXd c = decomp.coefficients(f);
  return decomp.vectors * (c.array() / (lambda + decomp.eigenvalues.array())).matrix();
}

Eigen::VectorXd semigroup_preimage(const SpectralDecomp& decomp, double lambda, double t, const Eigen::VectorXd& f) {
  const Eigen::VectorXd c = decomp.coefficients(f);
  const Eigen::ArrayXd mu = decomp.eigenvalues.array();
  return decomp.vectors * (c.array() * (lambda + mu) * (-t * mu).exp()).matrix();
}

Eigen::VectorXd semigroup_apply(const GeneratorMatrix& A, double t, const Eigen::VectorXd& f) {
  if (!(t >= 0.0)) throw ConfigError("semigroup_apply: t must be nonnegative");
  if (static_cast<std::size_t>(f.size()) != A.size()) throw ConfigError("semigroup_apply: function size mismatch");
  const double Lambda = A.size() ? A.max_total_rate() : 0.0;
  if (t == 0.0 || !(Lambda > 0.0)) return f;
  const double m = Lambda * t;
  if (m > 1e6) throw CapabilityError("semigroup_apply: Lambda t above 1e6 uniformization steps");
  // Poisson weights in log space; the tail beyond k_max is below 1e-12
  const int k_max = static_cast<int>(std::ceil(m + 12.0 * std::sqrt(m) + 40.0));
  Eigen::VectorXd out = f;
  Eigen::VectorXd power = f;
  double tail = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    power += A.apply(power) / Lambda;
    const double w = std::exp(-m + k * std::log(m) - std::lgamma(k + 1.0));
    out += w * (power - f);
    tail -= std::exp(-m + (k - 1) * std::log(m) - std::lgamma(static_cast<double>(k)));
    if (k > m && tail < 1e-12) break;
  }
  return out;
}

Resolvent::Resolvent(const GeneratorMatrix& A, double lambda) : A_(&A), lambda_(lambda) {
  if (!(lambda > 0.0)) throw ConfigError("resolvent: lambda must be positive");
  Eigen::MatrixXd M = -A.dense();
  M.diagonal().array() += lambda;
  llt_.compute(M);
  if (llt_.info() != Eigen::Success) throw NumericError("resolvent: Cholesky factorization failed", 0.0);
}

Eigen::VectorXd Resolvent::apply(const Eigen::VectorXd& f) const {
  if (static_cast<std::size_t>(f.size()) != A_->size()) throw ConfigError("resolvent: function size mismatch");
  const Eigen::VectorXd Af = A_->apply(f);
  Eigen::VectorXd u = f / lambda_;
  if (!Af.isZero(0.0)) u += llt_.solve(Af) / lambda_;
  const Eigen::VectorXd residual = lambda_ * u - A_->apply(u) - f;
  const double scale = std::fmax(f.lpNorm<Eigen::Infinity>(), 1e-300);
  const double res = residual.lpNorm<Eigen::Infinity>();
  if (res > 1e-8 * scale) throw NumericError("resolvent: residual above tolerance", u(0), res);
  return u;
}

Eigen::VectorXd resolvent(const GeneratorMatrix& A, double lambda, const Eigen::VectorXd& f) {
  return Resolvent(A, lambda).apply(f);
}

ResolventIdentityReport verify_resolvent_identity(const ConductanceMatrix& C, const GeneratorMatrix& A, double lambda,
                                                  const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  const Lattice& lat = A.lattice();
  const Eigen::VectorXd u = resolvent(A, lambda, f);
  auto form = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double e = dirichlet_form(C, a, b);
    if (A.mode() == GeneratorMode::Killed) e += lat.nu() * (A.kill().array() * a.array() * b.array()).sum();
    return e;
  };
  ResolventIdentityReport r;
  const double fg = inner_product(lat, f, g), ug = inner_product(lat, u, g);
  r.form = form(u, g);
  r.right_side = fg - lambda * ug;
  r.absolute = std::fabs(r.form - r.right_side);
  const double scale = std::fabs(r.form) + std::fabs(fg) + lambda * std::fabs(ug);
  r.relative = scale > 0.0 ? r.absolute / scale : 0.0;
  const double fu = inner_product(lat, f, u), uu = inner_product(lat, u, u);
  r.energy = form(u, u);
  r.energy_right = fu - lambda * uu;
  const double escale = std::fabs(r.energy) + std::fabs(fu) + lambda * std::fabs(uu);
  r.energy_relative = escale > 0.0 ? std::fabs(r.energy - r.energy_right) / escale : 0.0;
  return r;
}

HarmonicSolution solve_harmonic(const GeneratorMatrix& A, const Ball& ball, const Eigen::VectorXd& boundary) {
  const Lattice& lat = A.lattice();
  const std::size_t N = lat.size();
  if (static_cast<std::size_t>(boundary.size()) != N) throw ConfigError("solve_harmonic: boundary data size mismatch");
  if (ball.center >= N) throw ConfigError("solve_harmonic: center out of range");
  HarmonicSolution sol;
  sol.ball = ball;
  std::vector<std::size_t> exterior;
  for (std::size_t x = 0; x < N; ++x)
    (distance(lat.site(x), lat.site(ball.center)) <= ball.radius ? sol.interior : exterior).push_back(x);
  if (sol.interior.empty()) throw ConfigError("solve_harmonic: no sites inside the ball");
  if (exterior.empty() && A.mode() == GeneratorMode::Conservative)
    throw ConfigError("solve_harmonic: the ball covers the whole lattice");
  for (std::size_t y : exterior)
    if (!std::isfinite(boundary(y))) throw ConfigError("solve_harmonic: boundary data must be finite");

  // h = c + w with c the first exterior value, so constant data gives h == c exactly
  const double c = exterior.empty() ? 0.0 : boundary(exterior.front());
  const Eigen::Index m = static_cast<Eigen::Index>(sol.interior.size());
  Eigen::MatrixXd M(m, m);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t x = sol.interior[i];
    for (Eigen::Index j = 0; j < m; ++j) M(i, j) = -A.rate(x, sol.interior[j]);
    M(i, i) = -A.diagonal()(x);
    double s = 0.0;
    for (std::size_t y : exterior) s += A.rate(x, y) * (boundary(y) - c);
    rhs(i) = s - A.kill()(x) * c;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NumericError("solve_harmonic: interior block is singular", 0.0);
  const Eigen::VectorXd w = rhs.isZero(0.0) ? Eigen::VectorXd::Zero(m) : Eigen::VectorXd(llt.solve(rhs));
  sol.values = boundary;
  for (Eigen::Index i = 0; i < m; ++i) sol.values(sol.interior[i]) = c + w(i);

  const Eigen::VectorXd Ah = A.apply(sol.values);
  for (std::size_t x : sol.interior) {
    double scale = A.kill()(x) * std::fabs(sol.values(x));
    for (std::size_t y = 0; y < N; ++y) scale += A.rate(x, y) * std::fabs(sol.values(y));
    if (scale > 0.0) sol.max_residual = std::fmax(sol.max_residual, std::fabs(Ah(x)) / scale);
  }
  return sol;
}

MartingaleReport martingale_check(const GeneratorMatrix& A, const HarmonicSolution& h, const std::vector<double>& times,
                                  const McOptions& opts) {
  if (times.empty()) throw ConfigError("martingale_check: no times");
  const double t_max = *std::max_element(times.begin(), times.end());
  const ChainSimulator sim(A);
  const std::size_t T = times.size();
  std::vector<double> values(opts.paths * T);
  parallel_blocks(opts.paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      PathStream rng(opts.seed, i);
      const PathSample p = sim.run(h.ball.center, t_max, rng, h.ball);
      for (std::size_t k = 0; k < T; ++k) {
        std::size_t site = p.start;
        for (const JumpEvent& e : p.events) {
          if (e.time > times[k]) break;
          site = e.site;
        }
        values[i * T + k] = site == kCemetery ? 0.0 : h.values(site);
      }
    }
  });
  MartingaleReport report;
  report.start_value = h.values(h.ball.center);
  report.passed = true;
  std::vector<double> column(opts.paths);
  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t i = 0; i < opts.paths; ++i) column[i] = values[i * T + k];
    const SampleMoments m = sample_moments(column);
    MartingalePoint pt{times[k], m.mean, m.stderr_of_mean, false};
    pt.consistent = std::fabs(m.mean - report.start_value) <= 3.0 * m.stderr_of_mean + 1e-12 * std::fabs(report.start_value);
    report.passed = report.passed && pt.consistent;
    report.points.push_back(pt);
  }
  return report;
}

const char* to_string(PairPolicy policy) {
  return policy == PairPolicy::DistanceEnvelope ? "distance-envelope" : "all-pairs";
}

PairPolicy parse_pair_policy(const std::string& name) {
  if (name == "distance-envelope") return PairPolicy::DistanceEnvelope;
  if (name == "all-pairs") return PairPolicy::AllPairs;
  throw ConfigError("unknown pair policy '" + name + "' (expected distance-envelope or all-pairs)");
}

HolderFit holder_fit(const Lattice& lattice, const Eigen::VectorXd& u, const Point& center, double radius,
                     const HolderOptions& opts) {
  if (static_cast<std::size_t>(u.size()) != lattice.size()) throw ConfigError("holder_fit: function size mismatch");
  std::vector<std::size_t> region;
  for (std::size_t x = 0; x < lattice.size(); ++x)
    if (distance(lattice.site(x), center) < radius) region.push_back(x);
  double sup = 0.0;
  for (std::size_t x : region) sup = std::fmax(sup, std::fabs(u(x)));
  const double floor = 1e-12 * sup;
  const double dmin = opts.min_distance, dmax = opts.max_distance > 0.0 ? opts.max_distance : INFINITY;

  HolderFit fit;
  std::vector<double> lx, ly;
  std::vector<std::pair<double, double>> used;  // (distance, |du|)
  std::map<long, std::pair<double, double>> classes;  // squared grid distance -> (distance, max |du|)
  for (std::size_t a = 0; a < region.size(); ++a)
    for (std::size_t b = a + 1; b < region.size(); ++b) {
      const std::size_t x = region[a], y = region[b];
      const double dist = distance(lattice.site(x), lattice.site(y));
      if (dist < dmin || dist > dmax) continue;
      ++fit.pairs;
      const double du = std::fabs(u(x) - u(y));
      if (opts.policy == PairPolicy::AllPairs) {
        if (du > floor && du > 0.0) used.emplace_back(dist, du);
      } else {
        long key = 0;
        for (int i = 0; i < lattice.dimension(); ++i) {
          const long k = lattice.coords(x)[i] - lattice.coords(y)[i];
          key += k * k;
        }
        auto [it, fresh] = classes.try_emplace(key, dist, du);
        if (!fresh) it->second.second = std::fmax(it->second.second, du);
      }
    }
  if (opts.policy == PairPolicy::DistanceEnvelope)
    for (const auto& [key, v] : classes)
      if (v.second > floor && v.second > 0.0) used.push_back(v);
  for (const auto& [dist, du] : used) {
    lx.push_back(std::log(dist));
    ly.push_back(std::log(du));
  }
  fit.points = used.size();
  std::ostringstream desc;
  desc << to_string(opts.policy) << " in B(" << center.to_string() << ", " << radius << ")";
  if (dmin > 0.0 || std::isfinite(dmax)) desc << " with distances in [" << dmin << ", " << dmax << "]";
  fit.pair_set = desc.str();
  if (used.size() < 10) {
    std::ostringstream os;
    os << "holder_fit: only " << used.size() << " usable points above the noise floor (need 10)";
    throw InsufficientDataError(os.str());
  }
  const LinearFit lf = least_squares(lx, ly);
  fit.exponent = lf.slope;
  fit.residual = lf.rms_residual;
  for (const auto& [dist, du] : used) fit.constant = std::fmax(fit.constant, du / std::pow(dist, fit.exponent));
  // the envelope covers every pair in the window, not only the regression points
  if (opts.policy == PairPolicy::DistanceEnvelope) {
    for (const auto& [key, v] : classes) fit.constant = std::fmax(fit.constant, v.second / std::pow(v.first, fit.exponent));
  }
  return fit;
}

}  // namespace jumplab
