#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "jumplab/chain.hpp"
#include "jumplab/errors.hpp"
#include "jumplab/functionals.hpp"
#include "jumplab/quadrature.hpp"
#include "jumplab/rng.hpp"

using namespace jumplab;

namespace {

// int_a^b int_c^d |xi - zeta|^{-3/2} for c > b, from G'' = u^{-3/2} with G = -4 sqrt(u).
double stable_cell_integral(double a, double b, double c, double d) {
  const auto G = [](double u) { return -4.0 * std::sqrt(u); };
  return G(d - a) - G(c - a) - G(d - b) + G(c - b);
}

double far_conductance(int n) {
  const Lattice lat = build_lattice(1, n, Point{0.0}, Point{1.0});
  const ConductanceMatrix C = build_conductances(KernelSpec::isotropic_stable(1, 0.5, 1.0), lat);
  return C.entries(0, static_cast<Eigen::Index>(lat.nearest(Point{1.0})));
}

double cos_bump(double x) { return std::fabs(x) < 0.5 ? std::pow(std::cos(M_PI * x), 2) : 0.0; }

// E(f, f) = int int (f(x) - f(y))^2 |x - y|^{-3/2} dx dy for the cos^2 bump,
// via g(w) = int (f(x) - f(x + w))^2 dx and w = u^2.
double continuum_bump_energy() {
  const GaussRule& rule = gauss_legendre(40);
  const auto g = [&](double w) {
    if (w >= 1.0) return 0.75;
    const double corr = gauss_integrate([&](double x) { return cos_bump(x) * cos_bump(x + w); }, -0.5, 0.5 - w, rule);
    return 0.75 - 2.0 * corr;
  };
  double near = 0.0;
  const int panels = 64;
  for (int p = 0; p < panels; ++p)
    near += gauss_integrate([&](double u) { return 2.0 * g(u * u) / (u * u); }, double(p) / panels,
                            double(p + 1) / panels, rule);
  return 2.0 * (near + 0.75 * 2.0);
}

Eigen::VectorXd sample(const Lattice& lat, double (*f)(double)) {
  Eigen::VectorXd v(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) v(i) = f(lat.site(i)[0]);
  return v;
}

}  // namespace

TEST_SUITE("chain") {
  TEST_CASE("lattice enumeration") {
    const Lattice a = build_lattice(1, 4, Point{-1.0}, Point{1.0});
    CHECK(a.size() == 9);
    CHECK(a.nu() == 0.25);
    CHECK(a.site(0)[0] == -1.0);
    CHECK(a.site(1)[0] == -0.75);
    CHECK(a.site(8)[0] == 1.0);
    const Lattice b = build_lattice(2, 2, Point{0.0, 0.0}, Point{1.0, 1.0});
    CHECK(b.size() == 9);
    CHECK(b.nu() == 0.25);
    CHECK(b.site(1) == Point{0.0, 0.5});
    CHECK(b.site(3) == Point{0.5, 0.0});
    CHECK_THROWS_AS(build_lattice(1, 4, Point{0.0}, Point{0.1}), ConfigError);
    CHECK_THROWS_AS(build_lattice(1, 1, Point{0.0}, Point{10.0}), ConfigError);
    CHECK(a.nearest(Point{0.3}) == 5);
    CHECK(a.grid_distance(0, 8) == 8);
  }

  TEST_CASE("far conductance matches the closed-form cell integral") {
    const double oracle = 100.0 * stable_cell_integral(-0.05, 0.05, 0.95, 1.05);
    const double c10 = far_conductance(10);
    CHECK(std::fabs(c10 - oracle) <= 1e-10 * oracle);
    // cell averaging of |u|^{-3/2} at spacing 1/10 has a second-order term of 15/4 * h^2 / 12 = 0.3125%
    CHECK(c10 - 1.0 == doctest::Approx(0.0031414825).epsilon(1e-6));
  }

  TEST_CASE("far conductance converges at second order") {
    const double e10 = far_conductance(10) - 1.0;
    const double e20 = far_conductance(20) - 1.0;
    const double e40 = far_conductance(40) - 1.0;
    CHECK(e10 / e20 == doctest::Approx(4.0).epsilon(0.01));
    CHECK(e20 / e40 == doctest::Approx(4.0).epsilon(0.01));
  }

  TEST_CASE("constant kernel averages exactly") {
    const KernelSpec T = KernelSpec::tabulated({-2.0, 2.0}, {3.0, 3.0, 3.0, 3.0}, KernelBounds{});
    const Lattice lat = build_lattice(1, 4, Point{-1.0}, Point{1.0});
    const ConductanceMatrix C = build_conductances(T, lat);
    CHECK(C.entries(0, 5) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(C.entries(2, 7) == doctest::Approx(3.0).epsilon(1e-14));
  }

  TEST_CASE("touching cells diverge for order one under the literal policy") {
    const Lattice lat = build_lattice(1, 8, Point{-1.0}, Point{1.0});
    CHECK_THROWS_AS(build_conductances(KernelSpec::isotropic_stable(1, 1.0, 1.0), lat), DivergentEntryError);
    ConductanceOptions mm;
    mm.policy = AdjacentPolicy::MomentMatched;
    const ConductanceMatrix C = build_conductances(KernelSpec::isotropic_stable(1, 1.0, 1.0), lat, mm);
    CHECK(std::isfinite(C.entries.sum()));
  }

  TEST_CASE("moment-matched neighbours carry the truncated second moment") {
    const int n = 16;
    const double h = 1.0 / n;
    const Lattice lat = build_lattice(1, n, Point{-1.0}, Point{1.0});
    ConductanceOptions mm;
    mm.policy = AdjacentPolicy::MomentMatched;
    const ConductanceMatrix C = build_conductances(KernelSpec::isotropic_stable(1, 0.5, 1.0), lat, mm);
    const double L2 = 2.0 * std::pow(0.5 * h, 1.5) / 1.5;
    const double expected = L2 / (2.0 * h * h * lat.nu());
    CHECK(C.entries(10, 11) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(C.entries(11, 10) == C.entries(10, 11));
    const ConductanceMatrix P = build_conductances(KernelSpec::isotropic_stable(1, 0.5, 1.0), lat);
    CHECK(C.entries(10, 12) == P.entries(10, 12));
  }

  TEST_CASE("conservative rows sum to zero and killed rows to minus the kill rate") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    const Lattice lat = build_lattice(1, 32, Point{-1.0}, Point{1.0});
    const ConductanceMatrix C = build_conductances(J, lat);
    const GeneratorMatrix cons = assemble_generator(C, GeneratorMode::Conservative, J);
    CHECK(cons.row_sum().cwiseAbs().maxCoeff() == 0.0);
    CHECK(cons.apply(Eigen::VectorXd::Ones(lat.size())).cwiseAbs().maxCoeff() == 0.0);
    const GeneratorMatrix killed = assemble_generator(C, GeneratorMode::Killed, J);
    CHECK((killed.row_sum() + killed.kill()).cwiseAbs().maxCoeff() <= 1e-12 * killed.max_total_rate());
    const std::size_t mid = lat.nearest(Point{0.0});
    const double expected = 2.0 * compute_L1(J, Point{0.0}, 1.0).value;
    CHECK(killed.kill()(mid) == doctest::Approx(expected).epsilon(0.05));
    CHECK(cons.rate(3, 9) == doctest::Approx(2.0 * C.entries(3, 9) * lat.nu()).epsilon(1e-15));
  }

  TEST_CASE("kill rates for a slowly decaying variable-order tail") {
    const KernelSpec V =
        KernelSpec::variable_order(1, OrderField::sine(1, 0.5, 0.2, 1.0, 0.1, 0.2), 1.0, 1.0, 1.0, KernelBounds{});
    const Lattice lat = build_lattice(1, 8, Point{-1.0}, Point{1.0});
    const GeneratorMatrix A = assemble_generator(build_conductances(V, lat), GeneratorMode::Killed, V);
    const std::size_t mid = lat.nearest(Point{0.0});
    const double edge = lat.cell_box_hi()[0];
    CHECK(A.kill()(mid) == doctest::Approx(2.0 * tail_mass(V, Point{0.0}, edge).value).epsilon(1e-6));
    CHECK(outside_box_mass(V, Point{0.0}, Point{-1.0}, Point{1.0}, 0.0, INFINITY) ==
          doctest::Approx(2.0 * tail_mass(V, Point{0.0}, 1.0).value).epsilon(1e-6));
  }

  TEST_CASE("generator symmetry, Dirichlet form identity and spectrum") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    const Lattice lat = build_lattice(1, 24, Point{-1.0}, Point{1.0});
    const ConductanceMatrix C = build_conductances(J, lat);
    const GeneratorMatrix A = assemble_generator(C, GeneratorMode::Conservative, J);
    const Eigen::Index N = static_cast<Eigen::Index>(lat.size());
    PathStream rng(11, 0);
    const auto random_vec = [&] {
      Eigen::VectorXd v(N);
      for (Eigen::Index i = 0; i < N; ++i) v(i) = 2.0 * rng.uniform() - 1.0;
      return v;
    };
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd f = random_vec(), g = random_vec();
      const double lhs = inner_product(lat, A.apply(f), g);
      const double rhs = inner_product(lat, f, A.apply(g));
      CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::fabs(lhs));
      const double E = dirichlet_form(C, f, g);
      CHECK(std::fabs(E + lhs) <= 1e-10 * std::fabs(E));
    }
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd f = random_vec();
      CHECK(dirichlet_form(C, f, f) >= 0.0);
    }
    CHECK(dirichlet_form(C, Eigen::VectorXd::Constant(N, 2.5), random_vec()) == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-A.dense());
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }

  TEST_CASE("discrete energy approaches the continuum energy") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    const double E = continuum_bump_energy();
    double prev = INFINITY;
    for (int n : {64, 128, 256}) {
      CAPTURE(n);
      const Lattice lat = build_lattice(1, n, Point{-1.0}, Point{1.0});
      const ConductanceMatrix C = build_conductances(J, lat);
      const GeneratorMatrix A = assemble_generator(C, GeneratorMode::Killed, J);
      const Eigen::VectorXd f = sample(lat, cos_bump);
      const double En = -inner_product(lat, A.apply(f), f);
      const double rel = std::fabs(En - E) / E;
      CHECK(rel < prev);
      prev = rel;
      if (n == 256) CHECK(rel <= 0.02);
    }
  }

  TEST_CASE("two-dimensional assembly") {
    const KernelSpec J = KernelSpec::isotropic_stable(2, 0.5, 1.0);
    const Lattice lat = build_lattice(2, 4, Point{-0.5, -0.5}, Point{0.5, 0.5});
    const ConductanceMatrix C = build_conductances(J, lat);
    CHECK(lat.size() == 25);
    CHECK((C.entries - C.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(C.entries.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(C.entries.minCoeff() >= 0.0);
    const GeneratorMatrix A = assemble_generator(C, GeneratorMode::Conservative, J);
    CHECK(A.row_sum().cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("triples export") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    const Lattice lat = build_lattice(1, 4, Point{-1.0}, Point{1.0});
    const ConductanceMatrix C = build_conductances(J, lat);
    std::ostringstream out;
    write_triples(out, C);
    std::istringstream in(out.str());
    std::string header, columns, line;
    std::getline(in, header);
    std::getline(in, columns);
    CHECK(columns == "row,col,value");
    CHECK(header.find("n=4") != std::string::npos);
    CHECK(header.find("literal") != std::string::npos);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 72);
    std::ostringstream gen;
    write_triples(gen, assemble_generator(C, GeneratorMode::Killed, J), C.policy);
    CHECK(gen.str().find("killed") != std::string::npos);
  }

  TEST_CASE("policy and mode names round-trip") {
    CHECK(parse_adjacent_policy(to_string(AdjacentPolicy::MomentMatched)) == AdjacentPolicy::MomentMatched);
    CHECK(parse_generator_mode(to_string(GeneratorMode::Killed)) == GeneratorMode::Killed);
    CHECK_THROWS_AS(parse_adjacent_policy("midpoint"), ConfigError);
  }
}
