#include <cmath>
#include <vector>

#include "doctest.h"
#include "jumplab/errors.hpp"
#include "jumplab/functionals.hpp"

using namespace jumplab;

TEST_SUITE("functionals") {
  TEST_CASE("L1 and L2 closed forms for stable kernels") {
    for (double alpha : {0.5, 0.8}) {
      CAPTURE(alpha);
      const KernelSpec J = KernelSpec::isotropic_stable(1, alpha, 1.0);
      for (double s : {0.25, 1.0}) {
        CAPTURE(s);
        CHECK(compute_L1(J, Point{0.0}, s).value == doctest::Approx(2.0 * std::pow(s, -alpha) / alpha).epsilon(1e-6));
        CHECK(compute_L2(J, Point{0.0}, s).value ==
              doctest::Approx(2.0 * std::pow(s, 2.0 - alpha) / (2.0 - alpha)).epsilon(1e-6));
      }
    }
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    CHECK(compute_L1(J, Point{0.0}, 0.25).value == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(compute_L1(J, Point{0.0}, 1.0).value == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(compute_L2(J, Point{0.0}, 0.25).value == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    CHECK(compute_L2(J, Point{0.0}, 1.0).value == doctest::Approx(4.0 / 3.0).epsilon(1e-6));
  }

  TEST_CASE("L at r = 1/4 for alpha = 1/2") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    const LEstimate L = compute_L(J, Point{0.0}, 0.25, 0.5);
    CHECK(L.tail_term == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(L.moment_term == doctest::Approx(128.0 / 27.0).epsilon(1e-6));
    CHECK(L.total.value == doctest::Approx(12.7407407).epsilon(1e-6));
    CHECK(L.total.lower_estimate);
    const double lb = exit_functional_lower_bound(1, 1.0, 0.5, 0.25);
    CHECK(lb == doctest::Approx(2.3431458).epsilon(1e-6));
    CHECK(L.total.value >= lb);
  }

  TEST_CASE("deeper inner supremum never lowers L") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    SupremumGrid g;
    g.points_per_axis = 9;
    const double shallow = compute_L(J, Point{0.0}, 0.25, 0.5, g).total.value;
    g.inner_dyadic_depth = 4;
    const double deep = compute_L(J, Point{0.0}, 0.25, 0.5, g).total.value;
    CHECK(deep >= shallow * (1.0 - 1e-12));
  }

  TEST_CASE("L r^alpha is constant for the stable kernel") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    SupremumGrid g;
    g.points_per_axis = 9;
    const double ref = compute_L(J, Point{0.0}, 0.5, 0.5, g).total.value * std::sqrt(0.5);
    for (int k = 2; k <= 8; ++k) {
      const double r = std::ldexp(1.0, -k);
      CHECK(compute_L(J, Point{0.0}, r, 0.5, g).total.value * std::sqrt(r) == doctest::Approx(ref).epsilon(1e-6));
    }
  }

  TEST_CASE("two-dimensional L1 matches the closed form") {
    const KernelSpec J = KernelSpec::isotropic_stable(2, 1.2, 1.0);
    CHECK(compute_L1(J, Point{0.1, -0.2}, 0.3).value ==
          doctest::Approx(2.0 * M_PI * std::pow(0.3, -1.2) / 1.2).epsilon(1e-6));
  }

  TEST_CASE("ball grid keeps the center and stays inside the ball") {
    const auto pts = ball_grid(Point{0.2}, 0.3, 33);
    CHECK(pts.size() == 31);
    bool center = false;
    for (const Point& p : pts) {
      CHECK(std::fabs(p[0] - 0.2) < 0.3);
      center = center || std::fabs(p[0] - 0.2) < 1e-15;
    }
    CHECK(center);
    CHECK(ball_grid(Point{0.0, 0.0}, 1.0, 5).size() == 9);
  }

  TEST_CASE("constant order gives a flat comparability table") {
    const KernelSpec V =
        KernelSpec::variable_order(1, OrderField::constant(1, 0.6), 1.0, 1.0, 1.0, KernelBounds{});
    std::vector<double> radii;
    for (int k = 1; k <= 6; ++k) radii.push_back(std::ldexp(1.0, -k));
    SupremumGrid g;
    g.points_per_axis = 9;
    const ComparabilityReport rep = order_comparability(V, Point{0.0}, radii, 10.0, g);
    REQUIRE(rep.rows.size() == radii.size());
    CHECK(rep.ratio <= 1.0 + 1e-6);
    CHECK(rep.passed);
    CHECK(rep.envelope.passed);
  }

  TEST_CASE("sinusoidal order stays comparable") {
    const KernelSpec V =
        KernelSpec::variable_order(1, OrderField::sine(1, 0.5, 0.2, 1.0, 0.1, 0.2), 1.0, 1.0, 1.0, KernelBounds{});
    std::vector<double> radii;
    for (int k = 1; k <= 8; ++k) radii.push_back(std::ldexp(1.0, -k));
    SupremumGrid g;
    g.points_per_axis = 9;
    const ComparabilityReport rep = order_comparability(V, Point{0.0}, radii, 10.0, g);
    CHECK(rep.ratio <= 10.0);
    CHECK(rep.passed);
    CHECK(rep.envelope.worst_ratio <= 1.0 + 1e-9);
  }

  TEST_CASE("tail functional is monotone in the radius") {
    const KernelSpec V =
        KernelSpec::variable_order(1, OrderField::sine(1, 0.5, 0.2, 3.0, 0.1, 0.6), 1.0, 1.0, 1.0, KernelBounds{});
    double prev = INFINITY;
    for (double s : {0.01, 0.03, 0.1, 0.3, 1.0, 3.0}) {
      const double v = compute_L1(V, Point{0.2}, s).value;
      CHECK(v < prev);
      prev = v;
    }
  }

  TEST_CASE("doubling exponent recovers alpha") {
    const DoublingFit fit = doubling_exponent(KernelSpec::isotropic_stable(1, 0.7, 2.0), Point{0.0}, 1.0 / 64.0);
    CHECK(fit.sigma == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(fit.rms_residual < 1e-8);
  }

  TEST_CASE("non-positive radius is a domain error") {
    const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
    CHECK_THROWS_AS(compute_L1(J, Point{0.0}, 0.0), DomainError);
    CHECK_THROWS_AS(compute_L(J, Point{0.0}, -1.0, 0.5), DomainError);
  }
}
