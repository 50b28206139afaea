// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jumplab/convergence.hpp"
#include "jumplab/errors.hpp"
#include "jumplab/functionals.hpp"
#include "jumplab/operators.hpp"
#include "jumplab/pathsim.hpp"
#include "jumplab/statistics.hpp"
#include "scenario.hpp"

using namespace jumplab;

namespace {

// Pinned tolerances.
constexpr double kOracleRelTol = 1e-6;
constexpr double kComparabilityMax = 10.0;
constexpr double kSupRatioChangeMax = 2.0;
constexpr double kJointStderr = 3.0;
constexpr double kSlopeTol = 0.15;
constexpr double kKsLevel = 0.05;
constexpr double kIdentityTol = 1e-8;
constexpr double kPreimageTol = 1e-9;
constexpr double kHolderShiftMax = 0.1;
constexpr double kFinalRatioMax = 0.1;
constexpr double kRefinementChangeMax = 0.25;
constexpr std::size_t kPaths = 10000;

int g_threads = 1;

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Criterion {
  int id;
  std::string title;
  std::function<void(Outcome&)> run;
};

KernelSpec stable(double alpha = 0.5) { return KernelSpec::isotropic_stable(1, alpha, 1.0); }

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

double sup_norm(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd on_sites(const Lattice& lat, const std::function<double(double)>& f) {
  Eigen::VectorXd v(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) v(i) = f(lat.site(i)[0]);
  return v;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
double unit_bump(double x) { return bump(x, 0.0, 1.0); }

struct Chain {
  Lattice lattice;
  ConductanceMatrix C;
  GeneratorMatrix A;
  std::size_t origin = 0;
};

Chain make_chain(int n, GeneratorMode mode, double half_width = 1.0) {
  Chain c;
  c.lattice = build_lattice(1, n, Point{-half_width}, Point{half_width});
  ConductanceOptions co;
  co.threads = g_threads;
  c.C = build_conductances(stable(), c.lattice, co);
  c.A = assemble_generator(c.C, mode, stable());
  c.origin = c.lattice.nearest(Point{0.0});
  return c;
}

McOptions mc(std::size_t paths, std::uint64_t seed, double margin = 1.0) {
  McOptions o;
  o.paths = paths;
  o.seed = seed;
  o.threads = g_threads;
  o.margin = margin;
  return o;
}

std::vector<double> dyadic(int from, int to) {
  std::vector<double> v;
  for (int k = from; k <= to; ++k) v.push_back(std::ldexp(1.0, -k));
  return v;
}

// 1 -------------------------------------------------------------------------

void c1_oracles(Outcome& out) {
  double worst = 0.0;
  for (double alpha : {0.5, 0.8}) {
    const KernelSpec J = stable(alpha);
    for (double s : {0.01, 0.1, 0.25, 0.5, 1.0, 2.0})
      for (double x : {-0.7, 0.0, 0.3}) {
        worst = std::max(worst, rel(compute_L1(J, Point{x}, s).value, 2.0 * std::pow(s, -alpha) / alpha));
        worst = std::max(worst, rel(compute_L2(J, Point{x}, s).value, 2.0 * std::pow(s, 2.0 - alpha) / (2.0 - alpha)));
        worst = std::max(worst, rel(tail_mass(J, Point{x}, s).value, 2.0 * std::pow(s, -alpha) / alpha));
      }
  }
  out.require(worst <= kOracleRelTol, "closed forms");
  double tightest = INFINITY;
  bool bound_ok = true;
  for (double alpha : {0.5, 0.8})
    for (double r : dyadic(1, 8)) {
      const double L = compute_L(stable(alpha), Point{0.0}, r, alpha).total.value;
      const double lb = exit_functional_lower_bound(1, 1.0, alpha, r);
      bound_ok = bound_ok && L >= lb;
      tightest = std::min(tightest, L / lb);
    }
  out.require(bound_ok, "L >= lower bound");
  out.detail << "worst relative error " << worst << ", min L/bound " << tightest;
}

// 2 -------------------------------------------------------------------------

void c2_comparability(Outcome& out) {
  const KernelSpec V =
      KernelSpec::variable_order(1, OrderField::sine(1, 0.5, 0.2, 1.0, 0.1, 0.2), 1.0, 1.0, 1.0, KernelBounds{});
  SupremumGrid grid;
  grid.threads = g_threads;
  const ComparabilityReport rep = order_comparability(V, Point{0.0}, dyadic(1, 8), kComparabilityMax, grid);
  out.require(rep.ratio <= kComparabilityMax, "max/min ratio");
  out.detail << "max/min of L r^s(0) = " << rep.ratio << " over " << rep.rows.size() << " radii";
}

// 3 -------------------------------------------------------------------------

void c3_exit_probability(Outcome& out) {
  const std::vector<double> radii{0.1, 0.2, 0.4}, times{0.01, 0.02, 0.05};
  std::vector<double> sups;
  bool finite = true, monotone = true;
  for (int n : {128, 256}) {
    const Chain c = make_chain(n, GeneratorMode::Killed);
    double sup = 0.0;
    for (double r : radii) {
      const double L = compute_L(stable(), Point{0.0}, r, 0.5).total.value;
      const auto curve = estimate_exit_curve(c.A, c.origin, r, times, mc(kPaths, 3));
      for (std::size_t i = 0; i < curve.size(); ++i) {
        const double ratio = curve[i].probability / (times[i] * L);
        finite = finite && std::isfinite(ratio);
        sup = std::max(sup, ratio);
        if (i > 0) {
          const double joint = std::hypot(curve[i].stderr_of_estimate, curve[i - 1].stderr_of_estimate);
          monotone = monotone && curve[i].probability >= curve[i - 1].probability - kJointStderr * joint;
        }
      }
    }
    sups.push_back(sup);
  }
  const double change = std::max(sups[0] / sups[1], sups[1] / sups[0]);
  out.require(finite, "finite ratios");
  out.require(monotone, "nondecreasing in t");
  out.require(change < kSupRatioChangeMax, "sup ratio stability");
  out.detail << "sup ratio n=128 " << sups[0] << ", n=256 " << sups[1] << ", change " << change << "x";
}

// 4 -------------------------------------------------------------------------

void c4_mean_exit(Outcome& out) {
  const Chain c = make_chain(256, GeneratorMode::Killed);
  std::vector<double> lr, lm;
  for (double r : {0.05, 0.1, 0.2, 0.4}) {
    const MeanExitEstimate m = estimate_mean_exit(c.A, c.origin, r, 0.5, mc(kPaths, 4));
    out.require(!m.flagged, "censoring");
    lr.push_back(std::log(r));
    lm.push_back(std::log(m.mean));
  }
  const LinearFit fit = least_squares(lr, lm);
  out.require(std::fabs(fit.slope - 0.5) <= kSlopeTol, "slope");
  out.detail << "slope " << fit.slope << " (alpha 0.5)";
}

// 5 -------------------------------------------------------------------------

void c5_levy(Outcome& out) {
  const Chain c = make_chain(128, GeneratorMode::Killed);
  const std::vector<std::pair<std::string, PairFunction>> fns{
      {"zero", [](const Point&, const Point&) { return 0.0; }},
      {"capped_distance", [](const Point& x, const Point& y) { return std::fmin(distance(x, y), 1.0); }},
      {"weighted_square",
       [](const Point& x, const Point& y) { return std::fmin(std::pow(distance(x, y), 2), 1.0) * (1.0 + y[0] * y[0]); }}};
  for (const auto& [name, f] : fns) {
    const LevySystemReport rep = levy_system_check(c.A, f, c.origin, 0.5, mc(kPaths, 5));
    const bool ok = name == "zero" ? rep.jump_sum == 0.0 && rep.compensator == 0.0
                                   : rep.discrepancy <= kJointStderr;
    out.require(ok, name);
    out.detail << name << " " << (name == "zero" ? 0.0 : rep.discrepancy) << " stderr; ";
  }
}

// 6 -------------------------------------------------------------------------

void c6_meyer(Outcome& out) {
  const Chain c = make_chain(128, GeneratorMode::Killed);
  const MeyerSplit split = split_for_meyer(c.A, stable(), 1.0);
  const auto direct = sample_exit_times(c.A, c.origin, 0.25, 2.0, mc(2000, 61));
  const auto spliced = sample_exit_times(split, c.origin, 0.25, 2.0, mc(2000, 62));
  const KsResult ks = ks_two_sample(direct, spliced);
  out.require(!ks.rejected(kKsLevel), "KS at 5%");
  out.detail << "KS statistic " << ks.statistic << ", p = " << ks.p_value;
}

// 7 -------------------------------------------------------------------------

void c7_identities(Outcome& out) {
  double identity = 0.0, semigroup = 0.0, ck = 0.0, symmetry = 0.0, preimage = 0.0;
  bool constants = true;
  for (GeneratorMode mode : {GeneratorMode::Conservative, GeneratorMode::Killed}) {
    const Chain c = make_chain(128, mode);
    const SpectralDecomp D = spectral_decompose(c.A);
    const Eigen::VectorXd f = on_sites(c.lattice, unit_bump);
    const Eigen::VectorXd g = on_sites(c.lattice, [](double x) { return std::cos(2.0 * x); });
    const ResolventIdentityReport id = verify_resolvent_identity(c.C, c.A, 1.0, f, g);
    identity = std::max({identity, id.relative, id.energy_relative});
    semigroup = std::max(semigroup, sup_norm(semigroup_apply(c.A, 0.3, f) - spectral_semigroup(D, 0.3, f)) / sup_norm(f));
    const HeatKernelMatrix p1 = heat_kernel(D, 0.05), p2 = heat_kernel(D, 0.1), p3 = heat_kernel(D, 0.15);
    const double scale = p3.values.cwiseAbs().maxCoeff();
    ck = std::max(ck, (c.lattice.nu() * p1.values * p2.values - p3.values).cwiseAbs().maxCoeff() / scale);
    symmetry = std::max(symmetry, (p2.values - p2.values.transpose()).cwiseAbs().maxCoeff() / scale);
    const Eigen::VectorXd h = semigroup_preimage(D, 1.0, 0.3, f);
    preimage = std::max(preimage, sup_norm(resolvent(c.A, 1.0, h) - spectral_semigroup(D, 0.3, f)) / sup_norm(f));
    if (mode == GeneratorMode::Conservative) {
      const Eigen::VectorXd one = Eigen::VectorXd::Ones(c.lattice.size());
      constants = semigroup_apply(c.A, 0.3, one) == one;
      for (double lambda : {1.0, 4.0})
        constants = constants && resolvent(c.A, lambda, one) == Eigen::VectorXd::Constant(one.size(), 1.0 / lambda);
    }
  }
  out.require(identity <= kIdentityTol, "resolvent identity");
  out.require(semigroup <= kIdentityTol, "spectral vs uniformization");
  out.require(ck <= kIdentityTol && symmetry <= kIdentityTol, "Chapman-Kolmogorov / symmetry");
  out.require(preimage <= kPreimageTol, "preimage");
  out.require(constants, "constants");
  out.detail << "identity " << identity << ", semigroup " << semigroup << ", CK " << ck << ", symmetry " << symmetry
             << ", preimage " << preimage << ", constants " << (constants ? "exact" : "inexact");
}

// 8 -------------------------------------------------------------------------

void c8_regularity(Outcome& out) {
  std::vector<std::array<double, 3>> exponents;
  for (int n : {128, 256}) {
    const Chain c = make_chain(n, GeneratorMode::Killed);
    const Ball ball{c.origin, 0.5};
    const Eigen::VectorXd boundary = on_sites(c.lattice, sign);
    const HarmonicSolution h = solve_harmonic(c.A, ball, boundary);
    const Eigen::VectorXd heat = heat_kernel(spectral_decompose(c.A), 0.1).values.col(static_cast<Eigen::Index>(c.origin));
    const Eigen::VectorXd u = resolvent(c.A, 1.0, on_sites(c.lattice, sign));
    const Point center = c.lattice.site(c.origin);
    exponents.push_back({holder_fit(c.lattice, h.values, center, 0.25).exponent,
                         holder_fit(c.lattice, heat, center, 0.25).exponent,
                         holder_fit(c.lattice, u, center, 0.25).exponent});
    if (n == 128) {
      double violation = 0.0;
      for (std::size_t x : h.interior)
        violation = std::max({violation, h.values(x) - 1.0, -1.0 - h.values(x)});
      out.require(violation <= 0.0 && h.max_residual <= 1e-10, "maximum principle");
      const MartingaleReport m = martingale_check(c.A, h, {0.05, 0.2}, mc(kPaths, 8, 0.0));
      out.require(m.passed, "martingale");
    }
  }
  const char* names[3] = {"harmonic", "heat", "resolvent"};
  for (int k = 0; k < 3; ++k) {
    const double shift = std::fabs(exponents[1][k] - exponents[0][k]);
    out.require(exponents[0][k] > 0.0 && exponents[1][k] > 0.0, std::string(names[k]) + " exponent");
    out.require(shift < kHolderShiftMax, std::string(names[k]) + " shift");
    out.detail << names[k] << " " << exponents[0][k] << " -> " << exponents[1][k] << "; ";
  }
}

// 9 -------------------------------------------------------------------------

struct Tables {
  ErrorTable semigroup, resolvent;
};

Tables convergence_tables(const KernelSequenceSpec& seq, int n) {
  check_resolution(seq, n);
  const Lattice lat = build_lattice(1, n, Point{-3.0}, Point{3.0});
  ConductanceOptions co;
  co.threads = g_threads;
  const Eigen::VectorXd f = on_sites(lat, unit_bump);
  const GeneratorMatrix limit = build_generator(seq.limit, lat, co);
  std::vector<std::unique_ptr<GeneratorMatrix>> members;
  std::vector<const GeneratorMatrix*> ptrs;
  for (double w : seq.index_set) {
    members.push_back(std::make_unique<GeneratorMatrix>(build_generator(seq.member(w), lat, co)));
    ptrs.push_back(members.back().get());
  }
  const Point lo{-1.0}, hi{1.0};
  return {semigroup_convergence(limit, ptrs, seq.index_set, 0.5, f, lo, hi, g_threads),
          resolvent_convergence(limit, ptrs, seq.index_set, 1.0, f, lo, hi, g_threads)};
}

void c9_convergence(Outcome& out) {
  const KernelSequenceSpec seq = KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4, 8, 16, 32});
  const UicReport uic = verify_uic(seq, dyadic(1, 8), {Point{0.0}, Point{0.5}});
  out.require(uic.far_decreasing && uic.far_final_ratio < kFinalRatioMax, "far-tail column");
  out.require(uic.near_decreasing && uic.near_final_ratio < kFinalRatioMax, "near-moment column");
  const Tables coarse = convergence_tables(seq, 256);
  const Tables fine = convergence_tables(seq, 512);
  double moved = 0.0;
  for (const auto& [c, f] : {std::pair{&coarse.semigroup, &fine.semigroup}, std::pair{&coarse.resolvent, &fine.resolvent}})
    for (std::size_t i = 0; i < f->rows.size(); ++i)
      moved = std::max(moved, std::fabs(c->rows[i].sup_error - f->rows[i].sup_error) / f->rows[i].sup_error);
  out.require(fine.semigroup.decreasing && fine.semigroup.final_ratio < kFinalRatioMax, "semigroup table");
  out.require(fine.resolvent.decreasing && fine.resolvent.final_ratio < kFinalRatioMax, "resolvent table");
  out.require(moved < kRefinementChangeMax, "refinement stability");
  out.detail << "uic final ratios " << uic.far_final_ratio << "/" << uic.near_final_ratio << ", semigroup "
             << fine.semigroup.rows.front().sup_error << " -> " << fine.semigroup.rows.back().sup_error << ", resolvent "
             << fine.resolvent.rows.front().sup_error << " -> " << fine.resolvent.rows.back().sup_error
             << ", max refinement change " << moved;
}

// 10 ------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void c10_reproducibility(Outcome& out) {
  const cli::Json config = cli::Json::parse(R"({
    "seed": 20240601,
    "sequence": {"omegas": [2, 4, 8]},
    "lattice": {"n": 64},
    "experiments": [
      {"type": "kernel-verify"},
      {"type": "functionals", "points_per_axis": 9},
      {"type": "chain-build"},
      {"type": "exit-mc", "paths": 2000},
      {"type": "mean-exit-mc", "paths": 1000, "radii": [0.1, 0.2, 0.4]},
      {"type": "levy-check", "paths": 1000},
      {"type": "heat-kernel"},
      {"type": "resolvent-check"},
      {"type": "harmonic", "paths": 1000},
      {"type": "holder", "target": "resolvent"},
      {"type": "uic-check"},
      {"type": "weak-probe", "panels": 16},
      {"type": "converge"}
    ]
  })");
  const cli::Scenario s = cli::load_scenario(config, std::nullopt);
  const auto base = std::filesystem::temp_directory_path() / "jumplab_acceptance_reproducibility";
  std::filesystem::remove_all(base);
  const std::vector<std::pair<std::string, int>> runs{{"a", 1}, {"b", 4}, {"c", 1}};
  for (const auto& [dir, threads] : runs) cli::write_outputs(cli::run_scenario(s, threads), s, base / dir, threads, 0.0);
  std::size_t files = 0, mismatches = 0;
  for (const auto& entry : std::filesystem::directory_iterator(base / "a")) {
    const auto name = entry.path().filename();
    if (name == "metadata.json") continue;
    ++files;
    const std::string ref = slurp(entry.path());
    for (const char* other : {"b", "c"})
      if (!std::filesystem::exists(base / other / name) || slurp(base / other / name) != ref) ++mismatches;
  }
  std::filesystem::remove_all(base);
  out.require(files > 0 && mismatches == 0, "byte-identical outputs");
  out.detail << files << " files compared across threads 1/4/1, " << mismatches << " mismatches";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jumplab acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--threads", g_threads, "worker threads")->check(CLI::Range(1, 256));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "kernel and functional oracles", c1_oracles},
      {2, "variable-order comparability", c2_comparability},
      {3, "exit probability against t L(0, r)", c3_exit_probability},
      {4, "mean exit time scaling", c4_mean_exit},
      {5, "Levy system identity", c5_levy},
      {6, "splicing equivalence", c6_meyer},
      {7, "finite-dimensional identities", c7_identities},
      {8, "regularity and harmonic checks", c8_regularity},
      {9, "kernel sequence convergence", c9_convergence},
      {10, "reproducibility across thread counts", c10_reproducibility},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.passed = false;
      out.detail << "[error: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("C%-2d %s  %s: %s (%.1fs)\n", c.id, out.passed ? "PASS" : "FAIL", c.title.c_str(),
                out.detail.str().c_str(), secs);
    std::fflush(stdout);
    if (!out.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
