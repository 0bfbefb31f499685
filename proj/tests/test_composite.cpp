#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mist/composite.hpp"
#include "mist/errors.hpp"
#include "mist/kerr.hpp"
#include "oracles.hpp"

using namespace mist;
constexpr double pi = std::numbers::pi;

namespace {

CompositeSpace make(const CircuitParams& p, int nq, int nr, int levels = 0) {
    const auto s = diagonalize_ist(p, levels > 0 ? levels : nq);
    return build_composite(p, s, nq, nr);
}

}  // namespace

TEST_SUITE("composite") {

TEST_CASE("uncoupled spectrum is the sum of parts") {
    CircuitParams p = table_q1().at_flux(1.0);
    p.k_eff = 0.0;
    const auto s = diagonalize_ist(p, 6);
    const auto c = build_composite(p, s, 6, 5);
    for (int k = 0; k < 6; ++k)
        for (int n = 0; n < 5; ++n) {
            CHECK(c.energy(k, n) == doctest::Approx(s.energies(k) + n * p.omega_r).epsilon(1e-13));
            CHECK(c.label(k, n).overlap == 1.0);
            CHECK_FALSE(c.label(k, n).ambiguous);
        }
    CHECK(dressed_resonator_frequency(c, 0) == doctest::Approx(p.omega_r).epsilon(1e-13));
    const auto cl = numeric_chi_and_lamb(c);
    CHECK(std::abs(cl.chi) < 1e-12);
    CHECK(std::abs(cl.lamb_shift) < 1e-12);
    const auto strip = rwa_strip_energies(c, 3);
    REQUIRE(strip.size() == 4);
    for (const auto& st : strip) CHECK(st.energy == doctest::Approx(s.energies(st.k)).epsilon(1e-12));
    const auto g = rwa_strip_energies(c, 0);
    REQUIRE(g.size() == 1);
    CHECK(g[0].energy == doctest::Approx(c.eigenvalues(0)).epsilon(1e-14));
}

TEST_CASE("resonant two-level doublet splits by twice the coupling") {
    CircuitParams p = table_q2().at_flux(0.9);
    const auto s = diagonalize_ist(p, 2);
    p.omega_r = s.transition(1, 0);
    const auto c = build_composite(p, s, 2, 2);
    const double g = c.coupling_prefactor * std::abs(s.charge_elements(0, 1));
    CHECK(std::abs(c.eigenvalues(2) - c.eigenvalues(1) - 2.0 * g) < 1e-12);
    CHECK(c.label(1, 0).ambiguous);
    CHECK(c.label(0, 1).ambiguous);
    CHECK_THROWS_AS(dressed_resonator_frequency(c, 0), RangeError);
}

TEST_CASE("full Q1 composite matches a dense embedding diagonalization") {
    for (double phi : {0.0, 1.2, pi}) {
        const CircuitParams p = table_q1().at_flux(phi);
        const auto s = diagonalize_ist(p, 18);
        const auto c = build_composite(p, s, 18, 10);
        const Eigen::VectorXd ref = oracle::composite_eigenvalues(p, s, 18, 10);
        CHECK((c.eigenvalues - ref).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("labels are a bijection") {
    const auto c = make(table_q1().at_flux(2.0), 10, 8);
    std::vector<int> seen(static_cast<std::size_t>(c.dim()), 0);
    for (const auto& l : c.labels) {
        REQUIRE(l.k >= 0);
        REQUIRE(l.n >= 0);
        ++seen[static_cast<std::size_t>(c.product_index(l.k, l.n))];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
}

TEST_CASE("far-dispersive labels are clear") {
    const auto c = make(table_q2().at_flux(pi), 8, 6);
    for (int k = 0; k < 2; ++k)
        for (int n = 0; n < 3; ++n) CHECK(c.label(k, n).overlap > 0.9);
}

TEST_CASE("Hamiltonian is Hermitian") {
    const auto c = make(table_q2().at_flux(2.3), 12, 6);
    CHECK((c.hamiltonian - c.hamiltonian.adjoint()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("more resonator levels leave low photon states unchanged") {
    for (const auto& base : {table_q1(), table_q2()}) {
        const CircuitParams p = base.at_flux(0.6);
        const auto s = diagonalize_ist(p, 10);
        const auto a = build_composite(p, s, 10, 14);
        const auto b = build_composite(p, s, 10, 19);
        for (int k = 0; k < 10; ++k)
            for (int n = 0; n <= 14 - 8; ++n) {
                INFO("k=" << k << " n=" << n << " overlap=" << a.label(k, n).overlap);
                if (a.label(k, n).ambiguous || b.label(k, n).ambiguous) continue;
                CHECK(std::abs(a.energy(k, n) - b.energy(k, n)) < 1e-5);
            }
    }
}

TEST_CASE("dispersive shift of a two-level qubit") {
    CircuitParams p = table_q2();
    p.k_eff = 0.005;
    const auto s = diagonalize_ist(p, 2);
    const double wq = s.transition(1, 0);
    const double pref = 2.0 * p.k_eff * std::sqrt(p.omega_r * p.e_c);
    const double g = pref * std::abs(s.charge_elements(0, 1));
    for (double delta : {20.0 * g, 40.0 * g, -30.0 * g}) {
        p.omega_r = wq - delta;
        const auto c = build_composite(p, s, 2, 6);
        const double gg = c.coupling_prefactor * std::abs(s.charge_elements(0, 1));
        const double chi = numeric_chi_and_lamb(c).chi;
        CHECK(std::abs(chi - gg * gg / delta) < 0.1 * std::abs(gg * gg / delta));
    }
}

TEST_CASE("numeric and Kerr dispersive shifts agree for a weakly anharmonic qubit") {
    CircuitParams p;
    p.e_c = 0.1;
    p.e_j = 50.0;
    p.e_l = 0.5;
    p.k_eff = 0.002;
    p.kappa_r = 1e-3;
    p.omega_r = 1.0;
    const auto k0 = kerr_params(p);
    for (double delta : {-0.5, -0.3, 0.4}) {
        p.omega_r = k0.omega_q - delta;
        const auto k = kerr_params(p);
        REQUIRE(std::abs(k.omega_q - p.omega_r) > 10.0 * k.g_qr);
        const double chi_kerr = dispersive_shift(k.omega_q, k.eta_q, p.omega_r, k.g_qr);
        const double chi_num = numeric_chi_and_lamb(make(p, 6, 10)).chi;
        INFO("delta=" << delta << " kerr=" << chi_kerr << " num=" << chi_num);
        CHECK(std::abs(chi_num - chi_kerr) < 0.1 * std::abs(chi_num));
    }
}

TEST_CASE("ground and excited dressed frequencies differ by twice chi") {
    const auto c = make(table_q1().at_flux(0.5), 12, 8);
    const double d = dressed_resonator_frequency(c, 1) - dressed_resonator_frequency(c, 0);
    CHECK(d == doctest::Approx(2.0 * numeric_chi_and_lamb(c).chi).epsilon(1e-12));
}

TEST_CASE("resonator pull matches the multilevel second-order sum") {
    for (const auto& p : {table_q1(), table_q2().at_flux(pi)}) {
        const auto s = diagonalize_ist(p, 18);
        const auto c = build_composite(p, s, 18, 10);
        double pull = 0.0;
        for (int l = 1; l < 18; ++l) {
            const double w = s.energies(l);
            pull += std::norm(c.coupling_prefactor * s.charge_elements(0, l)) * 2.0 * w /
                    (p.omega_r * p.omega_r - w * w);
        }
        CHECK(std::abs(dressed_resonator_frequency(c, 0) - p.omega_r - pull) < 0.05 * std::abs(pull));
    }
}

TEST_CASE("strip bookkeeping and errors") {
    const auto c = make(table_q1().at_flux(1.5), 6, 6);
    CHECK_THROWS_AS(rwa_strip_energies(c, 6), RangeError);
    CHECK_THROWS_AS(strip_crossings(c, 0, 0), RangeError);
    CHECK_THROWS_AS(build_composite(table_q1(), diagonalize_ist(table_q1(), 4), 5, 3), ValidationError);
    const auto strip = rwa_strip_energies(c, 2);
    for (const auto& st : strip) CHECK(st.energy == doctest::Approx(c.energy(st.k, st.n) - st.n * c.omega_r));
}

TEST_CASE("uncoupled strips never cross") {
    CircuitParams p = table_q1().at_flux(pi);
    p.k_eff = 0.0;
    const auto s = diagonalize_ist(p, 8);
    p.omega_r = s.energies(4) / 4.0 + 0.01;
    const auto c = build_composite(p, s, 8, 12);
    CHECK(strip_crossings(c, 0, 4).empty());
}

TEST_CASE("coupled strip crossing below the resonator") {
    const CircuitParams p = table_q1().at_flux(2.1);
    const auto c = build_composite(p, diagonalize_ist(p, 12), 12, 24);
    const auto x = strip_crossings(c, 0, 5);
    REQUIRE_FALSE(x.empty());
    CHECK(x.front().photons == doctest::Approx(5.698).epsilon(1e-3));
    CHECK(x.front().gap < 0.25);
    CHECK(strip_crossings(c, 0, 5, 1e9).size() > x.size());
}

}
