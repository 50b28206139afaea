#include "jumplab/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jumplab/errors.hpp"
#include "jumplab/functionals.hpp"
#include "jumplab/parallel.hpp"

namespace jumplab {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::vector<std::size_t> compact_sites(const Lattice& lat, const Point& lo, const Point& hi) {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < lat.size(); ++x) {
    bool inside = true;
    for (int i = 0; i < lat.dimension(); ++i)
      inside = inside && lat.site(x)[i] >= lo[i] - 1e-12 && lat.site(x)[i] <= hi[i] + 1e-12;
    if (inside) out.push_back(x);
  }
  if (out.empty()) throw ConfigError("convergence: the compact region contains no lattice sites");
  return out;
}

ErrorTable finish(std::vector<ErrorRow> rows) {
  ErrorTable table;
  table.rows = std::move(rows);
  std::vector<double> errs;
  for (const auto& r : table.rows) errs.push_back(r.sup_error);
  table.decreasing = strictly_decreasing(errs);
  table.final_ratio = errs.empty() || errs.front() == 0.0 ? 0.0 : errs.back() / errs.front();
  table.passed = table.decreasing && table.final_ratio < 0.1;
  return table;
}

double sup_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const std::vector<std::size_t>& sites) {
  double e = 0.0;
  for (std::size_t x : sites) e = std::fmax(e, std::fabs(a(x) - b(x)));
  return e;
}

}  // namespace

KernelSequenceSpec KernelSequenceSpec::oscillatory(const KernelSpec& limit, double amplitude,
                                                   std::vector<double> omegas) {
  if (!(std::fabs(amplitude) < 1.0)) throw ConfigError("oscillatory sequence requires |a| < 1");
  KernelSequenceSpec seq{limit, nullptr, std::move(omegas), limit.bounds(), nullptr, ""};
  const int d = limit.dimension();
  seq.member = [limit, amplitude, d](double omega) {
    return KernelSpec::modulated(limit, Modulation::oscillatory(d, amplitude, omega));
  };
  seq.wavelength = [](double omega) { return omega != 0.0 ? 2.0 * kPi / std::fabs(omega) : kInf; };
  const double a = std::fabs(amplitude);
  seq.shared_bounds.kappa1 *= 1.0 - a;
  seq.shared_bounds.kappa2 *= 1.0 + a;
  seq.shared_bounds.kappa3 *= 1.0 + a;
  seq.shared_bounds.kappa4 *= 1.0 - a;
  std::ostringstream os;
  os << "J (1 + " << amplitude << " sin(omega (x1 + y1))) with J " << limit.family_name();
  seq.description = os.str();
  return seq;
}

KernelSequenceSpec KernelSequenceSpec::constant(const KernelSpec& limit, std::vector<double> indices) {
  KernelSequenceSpec seq{limit, nullptr, std::move(indices), limit.bounds(), nullptr, "constant sequence"};
  seq.member = [limit](double) { return limit; };
  seq.wavelength = [](double) { return kInf; };
  return seq;
}

UicReport verify_uic(const KernelSequenceSpec& seq, const std::vector<double>& eta_grid,
                     const std::vector<Point>& x_samples, const QuadratureOptions& opts) {
  if (eta_grid.size() < 2) throw ConfigError("verify_uic: need at least two eta values");
  for (std::size_t i = 0; i < eta_grid.size(); ++i) {
    if (!(eta_grid[i] > 0.0 && eta_grid[i] < 1.0)) throw ConfigError("verify_uic: eta must lie in (0, 1)");
    if (i > 0 && !(eta_grid[i] < eta_grid[i - 1])) throw ConfigError("verify_uic: eta grid must decrease");
  }
  if (x_samples.empty()) throw ConfigError("verify_uic: no x samples");
  std::vector<KernelSpec> members;
  for (double n : seq.index_set) members.push_back(seq.member(n));
  UicReport report;
  for (double eta : eta_grid) {
    UicRow row{eta, 0.0, 0.0};
    for (const KernelSpec& k : members)
      for (const Point& x : x_samples) {
        row.far_tail = std::fmax(row.far_tail, tail_mass(k, x, 1.0 / eta, opts).value);
        row.near_moment = std::fmax(row.near_moment, kernel_moment(k, x, 0.0, eta, 2, opts).value);
      }
    report.rows.push_back(row);
  }
  std::vector<double> far, near;
  for (const auto& r : report.rows) {
    far.push_back(r.far_tail);
    near.push_back(r.near_moment);
  }
  report.far_decreasing = strictly_decreasing(far) || far.front() == 0.0;
  report.near_decreasing = strictly_decreasing(near);
  report.far_final_ratio = far.front() > 0.0 ? far.back() / far.front() : 0.0;
  report.near_final_ratio = near.front() > 0.0 ? near.back() / near.front() : 0.0;
  report.passed = report.far_decreasing && report.near_decreasing && report.far_final_ratio < 0.1 &&
                  report.near_final_ratio < 0.1;
  report.note = "suprema over the listed members and x samples; the eta grid cannot certify an almost-every statement";
  return report;
}

double bump(double x, double center, double width) {
  const double z = (x - center) / width;
  if (std::fabs(z) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - z * z));
}

std::vector<TestFunction> default_test_functions() {
  // x + y is centred at pi/6, so |sin(omega (x + y))| has the same phase weight at every omega = 2^k.
  const double u0 = kPi / 6.0;
  std::vector<TestFunction> out;
  for (double w : {1.0, 0.25, 0.125}) {
    const double c1 = 0.5 * (u0 - w), c2 = 0.5 * (u0 + w);
    TestFunction tf;
    std::ostringstream os;
    os << "bump_pair_w" << w;
    tf.name = os.str();
    tf.psi = [=](double x, double y) { return bump(x, c1, w) * bump(y, c2, w); };
    tf.x_lo = c1 - w;
    tf.x_hi = c1 + w;
    tf.y_lo = c2 - w;
    tf.y_hi = c2 + w;
    out.push_back(std::move(tf));
  }
  return out;
}

namespace {

/// int int psi(x, y) weight(x, y) over the support with eta < |y - x| < 1/eta.
double annulus_integral(const TestFunction& tf, double eta, const std::function<double(double, double)>& weight,
                        const WeakProbeOptions& opts) {
  const GaussRule& rule = gauss_legendre(opts.order);
  auto panels = [&](double a, double b, const std::function<double(double)>& g) {
    double s = 0.0;
    const double w = (b - a) / opts.panels;
    for (int p = 0; p < opts.panels; ++p) s += gauss_integrate(g, a + p * w, a + (p + 1) * w, rule);
    return s;
  };
  return panels(tf.x_lo, tf.x_hi, [&](double x) {
    double s = 0.0;
    const double pieces[2][2] = {{x - 1.0 / eta, x - eta}, {x + eta, x + 1.0 / eta}};
    for (const auto& piece : pieces) {
      const double a = std::fmax(piece[0], tf.y_lo), b = std::fmin(piece[1], tf.y_hi);
      if (b > a) s += panels(a, b, [&](double y) { return tf.psi(x, y) * weight(x, y); });
    }
    return s;
  });
}

}  // namespace

WeakProbeReport weak_convergence_probe(const KernelSequenceSpec& seq, double eta,
                                       const std::vector<TestFunction>& test_functions, const WeakProbeOptions& opts) {
  if (seq.limit.dimension() != 1) throw ConfigError("weak_convergence_probe supports d = 1 only");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("weak_convergence_probe: eta must lie in (0, 1)");
  if (test_functions.empty()) throw ConfigError("weak_convergence_probe: no test functions");
  WeakProbeReport report;
  report.eta = eta;
  report.indices = seq.index_set;
  report.passed = true;
  std::vector<KernelSpec> members;
  for (double n : seq.index_set) members.push_back(seq.member(n));
  const KernelSpec& J = seq.limit;
  for (const TestFunction& tf : test_functions) {
    WeakProbeRow row;
    row.function = tf.name;
    row.limit_value = annulus_integral(tf, eta, [&](double x, double y) { return J(Point{x}, Point{y}); }, opts);
    for (const KernelSpec& k : members) {
      row.member_values.push_back(
          annulus_integral(tf, eta, [&](double x, double y) { return k(Point{x}, Point{y}); }, opts));
      row.gaps.push_back(std::fabs(annulus_integral(
          tf, eta, [&](double x, double y) { return k(Point{x}, Point{y}) - J(Point{x}, Point{y}); }, opts)));
    }
    const bool all_zero = std::all_of(row.gaps.begin(), row.gaps.end(), [](double g) { return g == 0.0; });
    row.decreasing = all_zero || strictly_decreasing(row.gaps);
    row.passed = all_zero || (row.decreasing && row.gaps.back() <= 0.05 * row.gaps.front());
    report.passed = report.passed && row.passed;
    report.rows.push_back(std::move(row));
  }
  report.note = "finite dictionary of tensor bumps; a single eta cannot certify an almost-every statement";
  return report;
}

void check_resolution(const KernelSequenceSpec& seq, int n) {
  for (double idx : seq.index_set) {
    const double cells = seq.wavelength ? seq.wavelength(idx) * n : kInf;
    if (cells < 8.0) {
      std::ostringstream os;
      os << "lattice n = " << n << " resolves member " << idx << " with only " << cells
         << " cells per oscillation period (need at least 8)";
      throw ConfigError(os.str());
    }
  }
}

GeneratorMatrix build_generator(const KernelSpec& spec, const Lattice& lattice, const ConductanceOptions& opts) {
  return assemble_generator(build_conductances(spec, lattice, opts), GeneratorMode::Conservative, spec, opts.quad);
}

namespace {

template <class Apply>
ErrorTable member_errors(const GeneratorMatrix& limit, const std::vector<const GeneratorMatrix*>& members,
                         const std::vector<double>& indices, double parameter, const Point& compact_lo,
                         const Point& compact_hi, int threads, Apply&& apply) {
  if (members.size() != indices.size()) throw ConfigError("convergence: members and indices differ in size");
  const auto sites = compact_sites(limit.lattice(), compact_lo, compact_hi);
  const Eigen::VectorXd base = apply(limit);
  std::vector<ErrorRow> rows(members.size());
  parallel_blocks(members.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      rows[i] = {indices[i], sup_error(apply(*members[i]), base, sites), limit.lattice().n(), parameter};
  });
  return finish(std::move(rows));
}

}  // namespace

ErrorTable semigroup_convergence(const GeneratorMatrix& limit, const std::vector<const GeneratorMatrix*>& members,
                                 const std::vector<double>& indices, double t, const Eigen::VectorXd& f,
                                 const Point& compact_lo, const Point& compact_hi, int threads) {
  return member_errors(limit, members, indices, t, compact_lo, compact_hi, threads,
                       [&](const GeneratorMatrix& A) { return semigroup_apply(A, t, f); });
}

ErrorTable resolvent_convergence(const GeneratorMatrix& limit, const std::vector<const GeneratorMatrix*>& members,
                                 const std::vector<double>& indices, double lambda, const Eigen::VectorXd& f,
                                 const Point& compact_lo, const Point& compact_hi, int threads) {
  return member_errors(limit, members, indices, lambda, compact_lo, compact_hi, threads,
                       [&](const GeneratorMatrix& A) { return resolvent(A, lambda, f); });
}

namespace {

template <class Table>
ErrorTable run_sequence(const KernelSequenceSpec& seq, const std::function<double(const Point&)>& f,
                        const ConvergenceSetup& setup, Table&& table) {
  check_resolution(seq, setup.n);
  const int d = seq.limit.dimension();
  const Lattice lat = build_lattice(d, setup.n, setup.box_lo, setup.box_hi);
  Eigen::VectorXd fv(lat.size());
  for (std::size_t x = 0; x < lat.size(); ++x) fv(x) = f(lat.site(x));
  const GeneratorMatrix limit = build_generator(seq.limit, lat, setup.conductance);
  std::vector<ErrorRow> rows;
  for (double idx : seq.index_set) {
    const GeneratorMatrix member = build_generator(seq.member(idx), lat, setup.conductance);
    const ErrorTable one = table(limit, std::vector<const GeneratorMatrix*>{&member}, std::vector<double>{idx}, fv);
    rows.push_back(one.rows.front());
  }
  return finish(std::move(rows));
}

}  // namespace

ErrorTable semigroup_convergence(const KernelSequenceSpec& seq, double t, const std::function<double(const Point&)>& f,
                                 const ConvergenceSetup& setup) {
  return run_sequence(seq, f, setup, [&](const GeneratorMatrix& L, const auto& m, const auto& idx, const auto& fv) {
    return semigroup_convergence(L, m, idx, t, fv, setup.compact_lo, setup.compact_hi);
  });
}

ErrorTable resolvent_convergence(const KernelSequenceSpec& seq, double lambda,
                                 const std::function<double(const Point&)>& f, const ConvergenceSetup& setup) {
  return run_sequence(seq, f, setup, [&](const GeneratorMatrix& L, const auto& m, const auto& idx, const auto& fv) {
    return resolvent_convergence(L, m, idx, lambda, fv, setup.compact_lo, setup.compact_hi);
  });
}

}  // namespace jumplab
