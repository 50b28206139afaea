#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "jumplab/convergence.hpp"
#include "jumplab/errors.hpp"

using namespace jumplab;

namespace {

const KernelSpec& stable() {
  static const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
  return J;
}

ConvergenceSetup small_setup(int n) {
  ConvergenceSetup s;
  s.n = n;
  s.box_lo = Point{-1.0};
  s.box_hi = Point{1.0};
  s.compact_lo = Point{-0.5};
  s.compact_hi = Point{0.5};
  return s;
}

double gauss_bump(const Point& x) { return std::exp(-8.0 * x[0] * x[0]); }

std::vector<double> dyadic_etas() {
  std::vector<double> etas;
  for (int k = 1; k <= 8; ++k) etas.push_back(std::ldexp(1.0, -k));
  return etas;
}

}  // namespace

TEST_SUITE("convergence") {
  TEST_CASE("oscillatory members are symmetric and share the declared bounds") {
    const KernelSequenceSpec seq = KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4, 8});
    CHECK(seq.shared_bounds.kappa1 == doctest::Approx(0.5));
    CHECK(seq.shared_bounds.kappa2 == doctest::Approx(1.5));
    CHECK(seq.shared_bounds.kappa3 == doctest::Approx(6.0));
    SamplingPlan plan;
    plan.center = Point{0.0};
    plan.z0 = Point{0.0};
    plan.halton_points = 12;
    plan.random_points = 12;
    plan.separations_per_point = 10;
    plan.tail_points = 3;
    for (double w : seq.index_set) {
      const KernelSpec Jn = seq.member(w);
      CHECK(eval_kernel(Jn, Point{0.1}, Point{0.45}) == eval_kernel(Jn, Point{0.45}, Point{0.1}));
      const BoundsReport rep = verify_bounds(Jn.with_bounds(seq.shared_bounds), plan);
      CHECK(rep.find("intensity_band")->passed);
      CHECK(rep.find("tail_mass")->passed);
    }
    CHECK(seq.wavelength(4.0) == doctest::Approx(2.0 * M_PI / 4.0));
  }

  TEST_CASE("uniform integrability columns for a constant sequence") {
    const UicReport rep = verify_uic(KernelSequenceSpec::constant(stable(), {1, 2, 3}), dyadic_etas(), {Point{0.0}});
    REQUIRE(rep.rows.size() == 8);
    for (const UicRow& row : rep.rows) {
      CHECK(row.far_tail == doctest::Approx(4.0 * std::sqrt(row.eta)).epsilon(1e-6));
      CHECK(row.near_moment == doctest::Approx(4.0 / 3.0 * std::pow(row.eta, 1.5)).epsilon(1e-6));
    }
    CHECK(rep.far_decreasing);
    CHECK(rep.near_decreasing);
    CHECK(rep.passed);
    CHECK_THROWS_AS(verify_uic(KernelSequenceSpec::constant(stable(), {1}), {0.1, 0.2}, {Point{0.0}}), ConfigError);
  }

  TEST_CASE("oscillatory columns stay within the modulation bound") {
    const KernelSequenceSpec seq = KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4, 8, 16, 32});
    const UicReport rep = verify_uic(seq, dyadic_etas(), {Point{0.0}, Point{0.5}});
    CHECK(rep.passed);
    for (const UicRow& row : rep.rows) {
      CHECK(row.far_tail <= 1.5 * 4.0 * std::sqrt(row.eta) * (1.0 + 1e-9));
      CHECK(row.near_moment <= 1.5 * 4.0 / 3.0 * std::pow(row.eta, 1.5) * (1.0 + 1e-9));
    }
  }

  TEST_CASE("weak probe of a constant sequence has zero gaps") {
    const WeakProbeReport rep =
        weak_convergence_probe(KernelSequenceSpec::constant(stable(), {1, 2, 3}), 0.05, default_test_functions());
    CHECK(rep.rows.size() == 3);
    for (const WeakProbeRow& row : rep.rows)
      for (double g : row.gaps) CHECK(g <= 1e-9 * std::fabs(row.limit_value));
    CHECK(rep.passed);
  }

  TEST_CASE("antisymmetric test functions integrate to zero") {
    TestFunction anti;
    anti.name = "antisymmetric";
    anti.psi = [](double x, double y) { return bump(x, 0.0, 1.0) * bump(y, 0.3, 0.5) - bump(y, 0.0, 1.0) * bump(x, 0.3, 0.5); };
    anti.x_lo = anti.y_lo = -1.0;
    anti.x_hi = anti.y_hi = 1.0;
    const WeakProbeReport rep =
        weak_convergence_probe(KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4}), 0.05, {anti});
    for (double v : rep.rows[0].member_values) CHECK(std::fabs(v) <= 1e-12);
    CHECK(std::fabs(rep.rows[0].limit_value) <= 1e-12);
  }

  TEST_CASE("oscillatory gaps decay") {
    const WeakProbeReport rep = weak_convergence_probe(
        KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4, 8, 16, 32}), 0.05, default_test_functions());
    for (const WeakProbeRow& row : rep.rows) {
      CAPTURE(row.function);
      CHECK(row.decreasing);
      CHECK(row.gaps.back() <= 0.05 * row.gaps.front());
    }
    CHECK(rep.passed);
  }

  TEST_CASE("constant sequences give zero semigroup and resolvent errors") {
    const KernelSequenceSpec seq = KernelSequenceSpec::constant(stable(), {1, 2});
    const ConvergenceSetup setup = small_setup(32);
    for (const ErrorRow& row : semigroup_convergence(seq, 0.5, gauss_bump, setup).rows) CHECK(row.sup_error <= 1e-10);
    for (const ErrorRow& row : resolvent_convergence(seq, 1.0, gauss_bump, setup).rows) CHECK(row.sup_error <= 1e-10);
  }

  TEST_CASE("trivial inputs give exactly zero errors") {
    const KernelSequenceSpec seq = KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4});
    const ConvergenceSetup setup = small_setup(32);
    for (const ErrorRow& row : semigroup_convergence(seq, 0.0, gauss_bump, setup).rows) CHECK(row.sup_error == 0.0);
    const auto one = [](const Point&) { return 1.0; };
    for (const ErrorRow& row : resolvent_convergence(seq, 2.0, one, setup).rows) CHECK(row.sup_error == 0.0);
  }

  TEST_CASE("too coarse a lattice for the fastest member is rejected") {
    const KernelSequenceSpec seq = KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 64});
    CHECK_THROWS_AS(check_resolution(seq, 32), ConfigError);
    CHECK_NOTHROW(check_resolution(seq, 128));
    CHECK_THROWS_AS(semigroup_convergence(seq, 0.5, gauss_bump, small_setup(32)), ConfigError);
  }

  TEST_CASE("prebuilt overload matches and is thread independent") {
    const KernelSequenceSpec seq = KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4, 8});
    const ConvergenceSetup setup = small_setup(32);
    const Lattice lat = build_lattice(1, setup.n, setup.box_lo, setup.box_hi);
    const GeneratorMatrix limit = build_generator(seq.limit, lat, setup.conductance);
    std::vector<GeneratorMatrix> members;
    for (double w : seq.index_set) members.push_back(build_generator(seq.member(w), lat, setup.conductance));
    std::vector<const GeneratorMatrix*> ptrs;
    for (const auto& m : members) ptrs.push_back(&m);
    Eigen::VectorXd f(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) f(i) = gauss_bump(lat.site(i));
    const ErrorTable a = semigroup_convergence(limit, ptrs, seq.index_set, 0.5, f, setup.compact_lo, setup.compact_hi, 1);
    const ErrorTable b = semigroup_convergence(limit, ptrs, seq.index_set, 0.5, f, setup.compact_lo, setup.compact_hi, 3);
    const ErrorTable c = semigroup_convergence(seq, 0.5, gauss_bump, setup);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].sup_error == b.rows[i].sup_error);
      CHECK(a.rows[i].sup_error == c.rows[i].sup_error);
      CHECK(a.rows[i].resolution == 32);
    }
  }

  TEST_CASE("uniform energy bound and equicontinuity across members") {
    const KernelSequenceSpec seq = KernelSequenceSpec::oscillatory(stable(), 0.5, {2, 4, 8});
    const Lattice lat = build_lattice(1, 64, Point{-1.0}, Point{1.0});
    Eigen::VectorXd f(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) f(i) = gauss_bump(lat.site(i));
    const double lambda = 1.0;
    const double bound = inner_product(lat, f, f) / lambda;
    std::vector<double> constants;
    for (double w : seq.index_set) {
      const KernelSpec Jn = seq.member(w);
      const ConductanceMatrix C = build_conductances(Jn, lat);
      const GeneratorMatrix A = assemble_generator(C, GeneratorMode::Conservative, Jn);
      const Eigen::VectorXd u = resolvent(A, lambda, f);
      const double energy = dirichlet_form(C, u, u);
      CHECK(energy <= inner_product(lat, f, u) * (1.0 + 1e-10));
      CHECK(inner_product(lat, f, u) <= bound);
      const ResolventIdentityReport rep = verify_resolvent_identity(C, A, lambda, f, f);
      CHECK(rep.energy_relative <= 1e-8);
      constants.push_back(holder_fit(lat, u, Point{0.0}, 0.5).constant);
    }
    const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
    CHECK(*hi <= 2.0 * *lo);
  }
}
