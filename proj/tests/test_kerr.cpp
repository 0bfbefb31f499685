#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mist/circuit.hpp"
#include "mist/errors.hpp"
#include "mist/kerr.hpp"
#include "oracles.hpp"

using namespace mist;
constexpr double pi = std::numbers::pi;

TEST_SUITE("kerr") {

TEST_CASE("stored displacement satisfies both conditions") {
    for (const auto& base : {table_q1(), table_q2()})
        for (double phi : {0.0, 0.4, 1.0, pi / 2.0}) {
            try {
                const auto k = kerr_params(base.at_flux(phi));
                CHECK(std::abs(k.residuals[0]) < 1e-12);
                CHECK(std::abs(k.residuals[1]) < 1e-12);
                const auto r = kerr_residuals(base.at_flux(phi), k.xi, k.phi_star);
                CHECK(std::abs(r[0]) < 1e-12);
                CHECK(std::abs(r[1]) < 1e-12);
                CHECK(k.phi_star > -pi);
                CHECK(k.phi_star <= pi);
            } catch (const RegimeError&) {
                // outside the perturbative window
            }
        }
}

TEST_CASE("zero flux solves the one-dimensional impedance condition") {
    const CircuitParams p = table_q2();
    const auto d = solve_displacement_impedance(p);
    CHECK(d.phi_star == 0.0);
    const double xi_j2 = 2.0 * p.e_c / p.e_j;
    const double lhs = d.xi * d.xi / (p.xi_l() * p.xi_l()) + d.xi * d.xi / xi_j2 * std::exp(-d.xi / 2.0);
    CHECK(lhs == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("no junction gives the shunt impedance") {
    CircuitParams p = table_q1();
    p.e_j = 0.0;
    const auto d = solve_displacement_impedance(p.at_flux(1.3));
    CHECK(d.xi == doctest::Approx(p.xi_l()).epsilon(1e-14));
    CHECK(d.phi_star == 0.0);
    const auto b = bare_kerr_params(p, d.xi, d.phi_star);
    CHECK(std::abs(b.eta_0) < 1e-14);
    const auto k = kerr_params(p);
    CHECK(k.omega_q == doctest::Approx(std::sqrt(8.0 * p.e_c * p.e_l)).epsilon(1e-12));
    CHECK(std::abs(k.eta_q) < 1e-14);
}

TEST_CASE("bare closed forms") {
    CircuitParams p = table_q2();
    p.e_c = 0.2;
    const auto b = bare_kerr_params(p, 0.1, 0.0);
    CHECK(b.omega_0 == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(b.eta_0 == doctest::Approx(0.2 - 0.5 * p.e_l * 0.01).epsilon(1e-15));
}

TEST_CASE("quarter flux matches the grid-seeded Newton oracle") {
    for (const auto& base : {table_q1(), table_q2()}) {
        const CircuitParams p = base.at_flux(pi / 2.0);
        const auto roots = oracle::kerr_roots(p);
        REQUIRE(roots.size() == 1);
        const auto d = solve_displacement_impedance(p);
        CHECK(std::abs(d.xi - roots[0][0]) < 1e-10);
        CHECK(std::abs(d.phi_star - roots[0][1]) < 1e-10);
    }
}

TEST_CASE("dressing is the identity without anharmonicity") {
    const CircuitParams p = table_q1().at_flux(0.7);
    const auto d = dressed_kerr_params(p, 0.3, 0.1, 5.0, 0.0);
    CHECK(d.omega_q == 5.0);
    CHECK(d.eta_q == 0.0);
}

TEST_CASE("tan-free terms only at zero effective flux") {
    const CircuitParams p = table_q1();
    const double w0 = 6.0, e0 = 0.2, xi = 0.3;
    const auto d = dressed_kerr_params(p, xi, 0.0, w0, e0);
    const double e2 = e0 * e0;
    const double wq = w0 - 7.0 * e2 / (24.0 * (w0 - 1.5 * e0)) - 5.0 * e2 / (24.0 * (w0 - 2.5 * e0));
    const double eq = e0 - 5.0 * e2 / (8.0 * (w0 - 1.5 * e0)) + 5.0 * e2 / (8.0 * (w0 - 3.5 * e0)) +
                      9.0 * e2 / (4.0 * (w0 - 2.5 * e0));
    CHECK(d.omega_q == doctest::Approx(wq).epsilon(1e-15));
    CHECK(d.eta_q == doctest::Approx(eq).epsilon(1e-15));
}

TEST_CASE("near-resonant dressing denominator is reported") {
    CHECK_THROWS_AS(dressed_kerr_params(table_q1(), 0.3, 0.0, 1.0, 0.5), SingularityError);
}

TEST_CASE("zero flux frequency matches exact diagonalization") {
    for (const auto& p : {table_q1(), table_q2()}) {
        const auto k = kerr_params(p);
        const double exact = omega10(p);
        CHECK(std::abs(k.omega_q - exact) < 0.01 * exact);
    }
}

TEST_CASE("dispersive shift vanishes without anharmonicity or coupling") {
    CHECK(dispersive_shift(6.0, 0.0, 4.5, 0.05) == 0.0);
    CHECK(dispersive_shift(6.0, 0.2, 4.5, 0.0) == 0.0);
    CHECK_THROWS_AS(dispersive_shift(4.5, 0.2, 4.5, 0.05), SingularityError);
    CHECK_THROWS_AS(dispersive_shift(4.7, 0.2, 4.5, 0.05), SingularityError);
}

TEST_CASE("dispersive shift is negative and bounded by g^2 / Delta for a qubit above the resonator") {
    const double wq = 6.0, wr = 5.0, g = 0.01;
    const double chi = dispersive_shift(wq, 0.2, wr, g);
    CHECK(chi < 0.0);
    CHECK(std::abs(chi) < g * g / (wq - wr) * 2.0);
}

TEST_CASE("coupling strength closed form") {
    const CircuitParams p = table_q2();
    CHECK(coupling_strength(p, 0.25) == doctest::Approx(p.k_eff * std::sqrt(p.omega_r * p.e_c / 0.25)).epsilon(1e-15));
}

TEST_CASE("weak shunt inductance approaches the transmon anharmonicity") {
    CircuitParams p;
    p.e_c = 0.1;
    p.e_j = 50.0;
    p.omega_r = 7.0;
    p.k_eff = 0.02;
    p.kappa_r = 1e-3;
    for (double el : {1e-2, 1e-3, 1e-4}) {
        p.e_l = el;
        const auto k = kerr_params(p);
        CHECK(std::abs(k.eta_q - p.e_c) < 0.05 * p.e_c);
    }
}

TEST_CASE("double-well flux is refused") {
    // Q1 with a weak shunt has several minima away from the sweet spot
    CircuitParams p = table_q1();
    p.e_l = 0.5;
    CHECK_THROWS_AS(kerr_params(p.at_flux(pi)), RegimeError);
}

}
