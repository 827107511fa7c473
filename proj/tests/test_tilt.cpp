#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mkv/measure.hpp"
#include "mkv/tilt.hpp"

using namespace mkv;

namespace {

const PotentialSpec& ref_spec() {
    static PotentialSpec s = make_quartic(0.25, -0.5, 1.5, 4.0);
    return s;
}

// Quadratic psi with q = 1/2 makes the tilted family exactly N(sigma, 1)
// (up to window truncation), so everything has a closed form.
const PotentialSpec& gauss_spec() {
    static PotentialSpec s = make_quadratic(0.5, 1.5, 12.0);
    return s;
}

constexpr double kHalfLog2Pi = 0.91893853320467274;

}  // namespace

TEST_SUITE("tilt") {

TEST_CASE("log partition of the Gaussian family is sigma^2/2 + log sqrt(2 pi)") {
    for (double sigma : {0.0, 1.0, -1.0, 0.5}) {
        double want = 0.5 * sigma * sigma + kHalfLog2Pi;
        CHECK(log_partition(gauss_spec(), sigma) == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("log partition is even in sigma for even psi") {
    for (double sigma : {0.3, 1.1})
        CHECK(log_partition(ref_spec(), sigma) == log_partition(ref_spec(), -sigma));
}

TEST_CASE("quadrature refinement leaves the log partition unchanged") {
    double coarse = log_partition(ref_spec(), 0.7);
    double fine = log_partition(ref_spec(), 0.7, 40001);
    CHECK(std::abs(coarse - fine) <= 1e-8);
}

TEST_CASE("tilted mean and variance match derivatives of the log partition") {
    CHECK(tilted_mean(ref_spec(), 0.0) == 0.0);
    for (double sigma : {-1.0, 0.5})
        CHECK(tilted_mean(gauss_spec(), sigma) == doctest::Approx(sigma).epsilon(1e-8));

    double h = 1e-4;
    double fd = (log_partition(ref_spec(), 0.7 + h) - log_partition(ref_spec(), 0.7 - h)) /
                (2.0 * h);
    CHECK(tilted_mean(ref_spec(), 0.7) == doctest::Approx(fd).epsilon(1e-6));

    double h2 = 1e-3;
    double fd2 = (log_partition(ref_spec(), 0.7 + h2) - 2.0 * log_partition(ref_spec(), 0.7) +
                  log_partition(ref_spec(), 0.7 - h2)) /
                 (h2 * h2);
    CHECK(tilted_variance(ref_spec(), 0.7) == doctest::Approx(fd2).epsilon(1e-4));
}

TEST_CASE("legendre transform solves the mean equation") {
    LegendrePoint at0 = legendre(ref_spec(), 0.0);
    CHECK(std::abs(at0.dphi) <= 1e-12);
    CHECK(std::abs(at0.phi + log_partition(ref_spec(), 0.0)) <= 1e-11);

    for (double m : {0.2, 0.8}) {
        LegendrePoint lp = legendre(ref_spec(), m);
        CHECK(std::abs(tilted_mean(ref_spec(), lp.dphi) - m) <= 1e-9);
        CHECK(lp.phi == doctest::Approx(lp.dphi * m - log_partition(ref_spec(), lp.dphi))
                            .epsilon(1e-12));
    }

    LegendrePoint g = legendre(gauss_spec(), 0.4);
    CHECK(g.dphi == doctest::Approx(0.4).epsilon(1e-8));
    CHECK(g.phi == doctest::Approx(0.5 * 0.16 - kHalfLog2Pi).epsilon(1e-7));

    CHECK_THROWS_AS(legendre(ref_spec(), 5.0), std::runtime_error);
    CHECK_THROWS_AS(legendre(ref_spec(), -5.0), std::runtime_error);
}

TEST_CASE("effective free energy is even with wells below the center") {
    CHECK(std::abs(hbar(ref_spec(), 0.4) - hbar(ref_spec(), -0.4)) <= 1e-10);
    double m_star = critical_points(ref_spec()).m_star;
    CHECK(hbar(ref_spec(), m_star) < hbar(ref_spec(), 0.0));
}

TEST_CASE("effective free energy equals the free energy of the matching tilt") {
    Grid grid(400, 4.0);
    for (double m : {0.0, 0.5}) {
        double sigma = legendre(ref_spec(), m).dphi;
        GridMeasure mu = tilted_measure(ref_spec(), sigma, grid);
        CHECK(std::abs(free_energy(ref_spec(), mu) - hbar(ref_spec(), m)) <= 1e-8);
    }
}

TEST_CASE("critical point count tracks the coupling strength") {
    CriticalPoints sub = critical_points(make_quartic(0.25, -0.5, 0.3, 4.0));
    CHECK(sub.count == 1);
    CHECK(sub.m_star == 0.0);

    CriticalPoints super = critical_points(ref_spec());
    CHECK(super.count == 3);
    CHECK(super.m_star == doctest::Approx(1.3214998298948601).epsilon(1e-10));
    // defining fixed point of the self-consistency map
    CHECK(std::abs(tilted_mean(ref_spec(), ref_spec().j * super.m_star) - super.m_star) <=
          1e-9);
    // coarse independent scan of the effective free energy lands at the same well
    double best_m = 0.0, best_v = hbar(ref_spec(), 0.0);
    for (int k = 1; k <= 60; ++k) {
        double m = 2.0 * double(k) / 60.0;
        double v = hbar(ref_spec(), m);
        if (v < best_v) {
            best_v = v;
            best_m = m;
        }
    }
    CHECK(std::abs(best_m - super.m_star) <= 2.0 / 60.0);
}

TEST_CASE("tilted grid measures") {
    Grid grid(400, 4.0);
    GridMeasure sym = tilted_measure(ref_spec(), 0.0, grid);
    for (std::size_t i = 0; i < grid.n; ++i) CHECK(sym.p[i] == sym.p[grid.n - 1 - i]);
    GridMeasure tl = tilted_measure(ref_spec(), 0.6, grid);
    CHECK(std::abs(mean(tl) - tilted_mean(ref_spec(), 0.6)) <= 1e-9);
}

TEST_CASE("stationary triple reference values") {
    Grid grid(400, 4.0);
    StationaryTriple t = stationary_triple(ref_spec(), grid);
    CHECK(t.m_star == doctest::Approx(1.3214998298948601).epsilon(1e-10));
    CHECK(t.sigma_star == doctest::Approx(1.9822497448422902).epsilon(1e-10));
    CHECK(t.f_minus == t.f_plus);  // bitwise, by the paired reductions
    CHECK(t.f_minus == doctest::Approx(-1.6420584169546453).epsilon(1e-12));
    CHECK(t.f_zero == doctest::Approx(-1.3622929093987413).epsilon(1e-12));
    CHECK(t.f_minus < t.f_zero);
    CHECK(reflect(t.mu_zero).p == t.mu_zero.p);
    CHECK(reflect(t.mu_plus).p == t.mu_minus.p);
    CHECK(mean(t.mu_plus) == doctest::Approx(t.m_star).epsilon(1e-4));
    CHECK(wasserstein2(t.mu_minus, t.mu_plus) ==
          doctest::Approx(2.655876578849118).epsilon(1e-12));
    CHECK(wasserstein2(t.mu_zero, t.mu_plus) ==
          doctest::Approx(1.4281159814116298).epsilon(1e-12));

    CHECK_THROWS_AS(stationary_triple(make_quartic(0.25, -0.5, 0.3, 4.0), grid),
                    std::runtime_error);
}

}
