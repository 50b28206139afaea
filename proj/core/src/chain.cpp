#include "jumplab/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "jumplab/errors.hpp"
#include "jumplab/parallel.hpp"

namespace jumplab {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr long kMidRange = 32;
constexpr long kLongRange = 160;

struct CellRule {
  std::vector<Point> offsets;  ///< relative to the cell center, for unit width
  std::vector<double> weights;  ///< sum to 1
};

CellRule cell_rule(int dim, int order) {
  const GaussRule& g = gauss_legendre(order);
  CellRule rule;
  int total = 1;
  for (int i = 0; i < dim; ++i) total *= order;
  for (int t = 0; t < total; ++t) {
    Point p(dim);
    double w = 1.0;
    int rest = t;
    for (int i = 0; i < dim; ++i) {
      const int k = rest % order;
      rest /= order;
      p[i] = 0.5 * g.nodes[k];
      w *= 0.5 * g.weights[k];
    }
    rule.offsets.push_back(p);
    rule.weights.push_back(w);
  }
  return rule;
}

/// Average of J over the product of two cells of width w centered at a and b.
double pair_average(const KernelSpec& spec, const Point& a, const Point& b, double w, const CellRule& rule) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.offsets.size(); ++i) {
    const Point xi = a + w * rule.offsets[i];
    double inner = 0.0;
    for (std::size_t j = 0; j < rule.offsets.size(); ++j) inner += rule.weights[j] * spec(xi, b + w * rule.offsets[j]);
    sum += rule.weights[i] * inner;
  }
  return sum;
}

/// Average of J over two touching cells by recursive subdivision. Separated
/// sub-pairs use the tensor rule; the per-level sums are extrapolated as a
/// geometric series.
double touching_average(const KernelSpec& spec, const Point& a, const Point& b, double h, int depth,
                        const CellRule& rule, std::size_t row, std::size_t col) {
  const int d = spec.dimension();
  const int children = 1 << d;
  std::vector<std::pair<Point, Point>> pairs{{a, b}};
  std::vector<double> levels;
  double w = h;
  double total = 0.0;
  for (int level = 0; level < depth && !pairs.empty(); ++level) {
    const double cw = 0.5 * w;
    const double fraction = std::pow(cw / h, 2 * d);
    std::vector<std::pair<Point, Point>> next;
    double level_sum = 0.0;
    for (const auto& [pa, pb] : pairs) {
      for (int ca = 0; ca < children; ++ca) {
        Point ac = pa;
        for (int i = 0; i < d; ++i) ac[i] += ((ca >> i) & 1 ? 0.5 : -0.5) * cw;
        for (int cb = 0; cb < children; ++cb) {
          Point bc = pb;
          for (int i = 0; i < d; ++i) bc[i] += ((cb >> i) & 1 ? 0.5 : -0.5) * cw;
          if ((ac - bc).sup_norm() > 1.5 * cw) {
            level_sum += fraction * pair_average(spec, ac, bc, cw, rule);
          } else {
            next.emplace_back(ac, bc);
          }
        }
      }
    }
    if (!std::isfinite(level_sum)) {
      total = level_sum;
      break;
    }
    levels.push_back(level_sum);
    total += level_sum;
    pairs = std::move(next);
    w = cw;
    if (level >= 3 && level_sum <= 1e-16 * total) return total;
  }
  const std::size_t m = levels.size();
  if (std::isfinite(total) && (m == 0 || levels[m - 1] == 0.0 || pairs.empty())) return total;
  const double q = m >= 2 ? levels[m - 1] / levels[m - 2] : std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(total) || !(q >= 0.0 && q < 0.999)) {
    std::ostringstream os;
    os << "conductance integral diverges for touching sites " << row << " and " << col
       << " (level ratio " << q << "); use the moment-matched policy";
    throw DivergentEntryError(os.str(), row, col, total);
  }
  return total + levels[m - 1] * q / (1.0 - q);
}

/// int_a^b g with refinement until the relative change is below rel_tol.
double refined_radial(const std::function<double(double)>& g, double a, double b, const RayProfile& profile,
                      const QuadratureOptions& opts) {
  double prev = 0.0, cur = 0.0;
  for (int level = 0; level <= opts.max_refinements; ++level) {
    const RadialEstimate est = integrate_radial(g, a, b, profile, opts, level);
    cur = est.resolved;
    if (level > 0 && std::fabs(cur - prev) <= opts.rel_tol * std::fabs(cur) + opts.abs_tol) return cur + est.far;
    prev = cur;
  }
  throw NumericError("radial quadrature did not reach the requested tolerance", cur, std::fabs(cur - prev));
}

double exit_distance(const Point& x, const Point& u, const Point& lo, const Point& hi) {
  double e = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.dim(); ++i) {
    if (u[i] > 1e-15) e = std::fmin(e, (hi[i] - x[i]) / u[i]);
    else if (u[i] < -1e-15) e = std::fmin(e, (lo[i] - x[i]) / u[i]);
  }
  return std::fmax(e, 0.0);
}

}  // namespace

const char* to_string(AdjacentPolicy policy) {
  return policy == AdjacentPolicy::Literal ? "literal" : "moment-matched";
}

const char* to_string(GeneratorMode mode) { return mode == GeneratorMode::Killed ? "killed" : "conservative"; }

AdjacentPolicy parse_adjacent_policy(const std::string& name) {
  if (name == "literal") return AdjacentPolicy::Literal;
  if (name == "moment-matched") return AdjacentPolicy::MomentMatched;
  throw ConfigError("unknown adjacent policy '" + name + "' (expected literal or moment-matched)");
}

GeneratorMode parse_generator_mode(const std::string& name) {
  if (name == "killed") return GeneratorMode::Killed;
  if (name == "conservative" || name == "conservative-truncated") return GeneratorMode::Conservative;
  throw ConfigError("unknown generator mode '" + name + "' (expected killed or conservative)");
}

ConductanceMatrix build_conductances(const KernelSpec& spec, const Lattice& lattice, const ConductanceOptions& opts) {
  const int d = lattice.dimension();
  if (spec.dimension() != d) throw ConfigError("build_conductances: kernel and lattice dimensions differ");
  if (opts.quad_order < 1 || opts.touching_order < 0) throw ConfigError("build_conductances: quadrature order must be >= 1");
  const std::size_t N = lattice.size();
  const double h = lattice.spacing();
  // distant pairs see a smoother integrand and need fewer nodes
  const CellRule far_rules[3] = {cell_rule(d, opts.quad_order), cell_rule(d, std::min(opts.quad_order, 3)),
                                 cell_rule(d, std::min(opts.quad_order, 2))};
  auto far_rule = [&](long g) -> const CellRule& {
    return g < kMidRange ? far_rules[0] : (g < kLongRange ? far_rules[1] : far_rules[2]);
  };
  const CellRule near_rule = cell_rule(d, opts.touching_order > 0 ? opts.touching_order : (d == 1 ? 8 : 4));
  const int depth = opts.touching_depth > 0 ? opts.touching_depth : (d == 1 ? 44 : 4);

  std::vector<double> moment;
  if (opts.policy == AdjacentPolicy::MomentMatched) {
    moment.resize(N);
    parallel_blocks(N, opts.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i)
        moment[i] = kernel_moment(spec, lattice.site(i), 0.0, 0.5 * h, 2, opts.quad).value;
    });
  }
  const double moment_scale = 1.0 / (d * 2.0 * h * h * lattice.nu());

  ConductanceMatrix C;
  C.lattice = lattice;
  C.policy = opts.policy;
  C.entries = Eigen::MatrixXd::Zero(N, N);
  parallel_blocks(N, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Point& x = lattice.site(i);
      for (std::size_t j = i + 1; j < N; ++j) {
        const Point& y = lattice.site(j);
        double c;
        const long g = lattice.grid_distance(i, j);
        if (g > 1) {
          c = pair_average(spec, x, y, h, far_rule(g));
        } else {
          int differing = 0;
          for (int a = 0; a < d; ++a) differing += lattice.coords(i)[a] != lattice.coords(j)[a];
          if (opts.policy == AdjacentPolicy::MomentMatched && differing == 1) {
            c = 0.5 * (moment[i] + moment[j]) * moment_scale;
          } else {
            c = touching_average(spec, x, y, h, depth, near_rule, i, j);
          }
        }
        C.entries(i, j) = c;
        C.entries(j, i) = c;
      }
    }
  });
  return C;
}

GeneratorMatrix GeneratorMatrix::from_rates(Lattice lattice, Eigen::MatrixXd rates, Eigen::VectorXd kill,
                                            GeneratorMode mode) {
  const Eigen::Index N = static_cast<Eigen::Index>(lattice.size());
  if (rates.rows() != N || rates.cols() != N) throw ConfigError("generator: rate matrix does not match the lattice");
  if (kill.size() != N) throw ConfigError("generator: kill vector does not match the lattice");
  rates.diagonal().setZero();
  if (!rates.allFinite() || (rates.array() < 0.0).any()) throw ConfigError("generator: rates must be finite and >= 0");
  if (!kill.allFinite() || (kill.array() < 0.0).any()) throw ConfigError("generator: kill rates must be finite and >= 0");
  const double scale = rates.cwiseAbs().maxCoeff();
  if ((rates - rates.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError("generator: rates are not symmetric");
  if (mode == GeneratorMode::Conservative) kill.setZero();
  GeneratorMatrix A;
  A.lattice_ = std::move(lattice);
  A.rates_ = std::move(rates);
  A.kill_ = std::move(kill);
  A.mode_ = mode;
  A.diagonal_.resize(N);
  A.off_sum_.resize(N);
  for (Eigen::Index x = 0; x < N; ++x) {
    double s = 0.0;
    const double* col = A.rates_.col(x).data();
    for (Eigen::Index y = 0; y < N; ++y) s += col[y];
    A.off_sum_(x) = s;
    A.diagonal_(x) = -(s + A.kill_(x));
  }
  return A;
}

Eigen::VectorXd GeneratorMatrix::apply(const Eigen::VectorXd& f) const {
  const Eigen::Index N = rates_.rows();
  if (f.size() != N) throw ConfigError("generator: function size mismatch");
  if (N == 0) return f;
  // sum_y q(x, y) (g(y) - g(x)) with g = f - f(0): exactly zero for constant f
  const Eigen::VectorXd g = f.array() - f(0);
  Eigen::VectorXd out = rates_ * g;
  out.array() -= off_sum_.array() * g.array() + kill_.array() * f.array();
  return out;
}

Eigen::VectorXd GeneratorMatrix::row_sum() const {
  const Eigen::Index N = rates_.rows();
  Eigen::VectorXd out(N);
  for (Eigen::Index x = 0; x < N; ++x) {
    double s = 0.0;
    const double* col = rates_.col(x).data();
    for (Eigen::Index y = 0; y < N; ++y) s += col[y];
    out(x) = s + diagonal_(x);
  }
  return out;
}

Eigen::MatrixXd GeneratorMatrix::dense() const {
  Eigen::MatrixXd M = rates_;
  M.diagonal() = diagonal_;
  return M;
}

double outside_box_mass(const KernelSpec& spec, const Point& x, const Point& lo, const Point& hi, double rmin,
                        double rmax, const QuadratureOptions& opts) {
  const int d = spec.dimension();
  if (d == 1) {
    double total = 0.0;
    for (double sign : {1.0, -1.0}) {
      const Point u{sign};
      const double a = std::fmax(rmin, exit_distance(x, u, lo, hi));
      if (!(rmax > a)) continue;
      auto g = [&](double rho) { return spec(x, x + rho * u); };
      total += refined_radial(g, a, rmax, spec.ray_profile(x, u), opts);
    }
    return 2.0 * total;
  }
  if (d != 2) throw ConfigError("outside_box_mass: dimension must be 1 or 2");
  // angular panels split at the corner directions, where the exit distance has kinks
  std::vector<double> cuts;
  for (double cx : {lo[0], hi[0]})
    for (double cy : {lo[1], hi[1]}) {
      double th = std::atan2(cy - x[1], cx - x[0]);
      if (th < 0.0) th += 2.0 * kPi;
      cuts.push_back(th);
    }
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(cuts.front() + 2.0 * kPi);
  const GaussRule& rule = gauss_legendre(16);
  double prev = 0.0, cur = 0.0, far = 0.0;
  for (int level = 0; level <= opts.max_refinements; ++level) {
    const int sub = 2 << level;
    cur = far = 0.0;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const double width = (cuts[p + 1] - cuts[p]) / sub;
      for (int s = 0; s < sub; ++s) {
        const double t0 = cuts[p] + s * width;
        const double half = 0.5 * width, mid = t0 + half;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
          const double th = mid + half * rule.nodes[k];
          const Point u{std::cos(th), std::sin(th)};
          const double a = std::fmax(rmin, exit_distance(x, u, lo, hi));
          if (!(rmax > a)) continue;
          auto g = [&](double rho) { return spec(x, x + rho * u) * rho; };
          const RadialEstimate est = integrate_radial(g, a, rmax, spec.ray_profile(x, u), opts, level);
          cur += half * rule.weights[k] * est.resolved;
          far += half * rule.weights[k] * est.far;
        }
      }
    }
    if (level > 0 && std::fabs(cur - prev) <= 1e-8 * std::fabs(cur) + opts.abs_tol) break;
    prev = cur;
  }
  return 2.0 * (cur + far);
}

GeneratorMatrix assemble_generator(const ConductanceMatrix& C, GeneratorMode mode, const KernelSpec& spec,
                                   const QuadratureOptions& opts) {
  const Lattice& lat = C.lattice;
  const std::size_t N = lat.size();
  Eigen::VectorXd kill = Eigen::VectorXd::Zero(N);
  if (mode == GeneratorMode::Killed) {
    const Point lo = lat.cell_box_lo(), hi = lat.cell_box_hi();
    for (std::size_t i = 0; i < N; ++i)
      kill(i) = outside_box_mass(spec, lat.site(i), lo, hi, 0.0, std::numeric_limits<double>::infinity(), opts);
  }
  return GeneratorMatrix::from_rates(lat, (2.0 * lat.nu()) * C.entries, std::move(kill), mode);
}

double dirichlet_form(const ConductanceMatrix& C, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  const Eigen::Index N = C.entries.rows();
  if (f.size() != N || g.size() != N) throw ConfigError("dirichlet_form: function size does not match the lattice");
  double sum = 0.0;
  for (Eigen::Index x = 0; x < N; ++x) {
    const double* col = C.entries.col(x).data();
    double s = 0.0;
    for (Eigen::Index y = 0; y < N; ++y) s += col[y] * (f(x) - f(y)) * (g(x) - g(y));
    sum += s;
  }
  const double nu = C.lattice.nu();
  return sum * nu * nu;
}

double inner_product(const Lattice& lattice, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  return lattice.nu() * f.dot(g);
}

namespace {

void write_entries(std::ostream& out, const Eigen::MatrixXd& M) {
  char buf[96];
  out << "row,col,value\n";
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      if (M(i, j) != 0.0) {
        std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g\n", static_cast<long>(i), static_cast<long>(j), M(i, j));
        out << buf;
      }
}

}  // namespace

void write_triples(std::ostream& out, const ConductanceMatrix& C) {
  out << "# " << C.lattice.describe() << ";mode=none;policy=" << to_string(C.policy) << "\n";
  write_entries(out, C.entries);
}

void write_triples(std::ostream& out, const GeneratorMatrix& A, AdjacentPolicy policy) {
  out << "# " << A.lattice().describe() << ";mode=" << to_string(A.mode()) << ";policy=" << to_string(policy) << "\n";
  write_entries(out, A.dense());
}

}  // namespace jumplab
