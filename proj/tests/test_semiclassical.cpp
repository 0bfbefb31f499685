#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mist/composite.hpp"
#include "mist/errors.hpp"
#include "mist/semiclassical.hpp"

using namespace mist;
constexpr double pi = std::numbers::pi;

TEST_SUITE("semiclassical") {

TEST_CASE("coherent amplitude follows the square-pulse closed form") {
    const double kappa = 0.008;
    const auto pr = square_protocol(amplitude_for_photons(16.0, kappa), 7.0, kappa);
    const double k_ang = 2.0 * M_PI * kappa;
    CHECK(alpha_at(pr, kappa, 0.0) == std::complex<double>(0.0, 0.0));
    CHECK(std::norm(alpha_at(pr, kappa, 10.0 / k_ang)) == doctest::Approx(16.0 * std::pow(1.0 - std::exp(-5.0), 2)));
    CHECK(std::norm(alpha_at(pr, kappa, 10.0 / k_ang)) == doctest::Approx(15.79).epsilon(1e-3));

    std::vector<double> times;
    for (int i = 0; i <= 50; ++i) times.push_back(pr.duration() * i / 50.0);
    const auto tr = solve_alpha(pr, kappa, times);
    REQUIRE(tr.alpha.size() == times.size());
    const double a_ss = 2.0 * pr.epsilon / kappa;
    const double a_on = a_ss * (1.0 - std::exp(-0.5 * k_ang * pr.t_on));
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double expect = t <= pr.t_on ? a_ss * (1.0 - std::exp(-0.5 * k_ang * t))
                                           : a_on * std::exp(-0.5 * k_ang * (t - pr.t_on));
        CHECK(std::abs(std::abs(tr.alpha[i]) - expect) < 1e-10);
        CHECK(tr.epsilon_profile[i] == pr.epsilon_at(t));
    }
}

TEST_CASE("long constant drive reaches the steady state") {
    const double kappa = 0.01;
    const auto pr = square_protocol(0.02, 7.0, kappa, 40.0, 1.0);
    const double a = std::abs(alpha_at(pr, kappa, pr.t_on * 0.999));
    CHECK(a * a == doctest::Approx(4.0 * 0.02 * 0.02 / (kappa * kappa)).epsilon(1e-6));
    const auto zero = solve_alpha(square_protocol(0.0, 7.0, kappa), kappa, {0.0, 10.0, 100.0});
    for (const auto& x : zero.alpha) CHECK(x == std::complex<double>(0.0, 0.0));
}

TEST_CASE("simple interaction vanishes at zero amplitude and scales linearly") {
    const CircuitParams p = table_q1().at_flux(1.1);
    const auto s = diagonalize_ist(p, 10);
    CHECK(simple_interaction_hamiltonian(s, p, 0.0, 0.3, 7.0, 10).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXcd h1 = simple_interaction_hamiltonian(s, p, 1.0, 0.0, 7.0, 10);
    const Eigen::MatrixXcd h3 = simple_interaction_hamiltonian(s, p, 3.0, 0.0, 7.0, 10);
    CHECK((h3 - 3.0 * h1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((h1 - h1.adjoint()).cwiseAbs().maxCoeff() < 1e-15 * h1.cwiseAbs().maxCoeff());
    // two levels reduce to a Rabi drive
    const Eigen::MatrixXcd r = simple_interaction_hamiltonian(s, p, 1.0, 0.0, 7.0, 2);
    CHECK(std::abs(r(0, 0)) < 1e-20);
    CHECK(std::abs(r(0, 1)) == doctest::Approx(2.0 * semiclassical_coupling(p) * std::abs(s.charge_elements(0, 1))));
}

TEST_CASE("renormalized coupling has support only below the photon number") {
    const CircuitParams p = table_q2().at_flux(0.7);
    const auto s = diagonalize_ist(p, 12);
    CHECK(renormalized_interaction_hamiltonian(s, p, 0.0, 0.0, 7.0, 12).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXcd h = renormalized_interaction_hamiltonian(s, p, std::sqrt(2.5), 0.0, 7.0, 12);
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 3; k < 12; ++k)
        for (int j = k + 1; j < 12; ++j) CHECK(h(k, j) == std::complex<double>(0.0, 0.0));
    CHECK(std::abs(h(2, 3)) > 0.0);
    for (double n2 : {0.5, 3.7, 7.2}) {
        const Eigen::MatrixXcd u = interaction_amplitude(s, p, std::sqrt(n2), 12, SemiclassicalModel::renormalized);
        for (int k = 0; k < 12; ++k)
            for (int j = k + 1; j < 12; ++j)
                if (k >= n2) CHECK(u(k, j) == std::complex<double>(0.0, 0.0));
    }
}

TEST_CASE("renormalized model approaches the simple model at large amplitude") {
    const CircuitParams p = table_q1().at_flux(0.5);
    const auto s = diagonalize_ist(p, 10);
    const double a = 1e3;
    const Eigen::MatrixXcd hs = interaction_amplitude(s, p, a, 10, SemiclassicalModel::simple);
    const Eigen::MatrixXcd hr = interaction_amplitude(s, p, a, 10, SemiclassicalModel::renormalized);
    CHECK((hs - hr).cwiseAbs().maxCoeff() < 1e-5 * hs.cwiseAbs().maxCoeff());
    CHECK_THROWS_AS(interaction_amplitude(s, p, a, 11, SemiclassicalModel::simple), ValidationError);
}

TEST_CASE("undriven semiclassical run does not leak") {
    SemiclassicalOptions o;
    o.m = 12;
    o.on_mult = 2.0;
    o.off_mult = 2.0;
    o.kappa_r = 0.02;
    for (auto model : {SemiclassicalModel::simple, SemiclassicalModel::renormalized}) {
        const auto r = mist_semiclassical(table_q1().at_flux(0.8), 0.0, 0, model, o);
        CHECK(r.leakage < 1e-9);
    }
}

TEST_CASE("driven evolution preserves the norm") {
    SemiclassicalOptions o;
    o.m = 14;
    o.on_mult = 2.0;
    o.off_mult = 1.0;
    o.kappa_r = 0.03;
    for (auto model : {SemiclassicalModel::simple, SemiclassicalModel::renormalized}) {
        const auto r = mist_semiclassical(table_q2().at_flux(1.9), 8.0, 1, model, o);
        CHECK(r.populations.sum() == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(r.leakage >= 0.0);
        CHECK(r.init_label == 1);
        CHECK(r.n_bar_achieved == doctest::Approx(8.0 * std::pow(1.0 - std::exp(-1.0), 2)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(mist_semiclassical(table_q2(), 1.0, 14, SemiclassicalModel::simple, o), ValidationError);
}

TEST_CASE("one-period propagator is unitary") {
    const CircuitParams p = table_q1().at_flux(1.4);
    const auto s = diagonalize_ist(p, 10);
    const Eigen::MatrixXcd c = interaction_amplitude(s, p, 3.0, 10, SemiclassicalModel::renormalized);
    const Eigen::MatrixXcd u = period_propagator(s.energies.head(10), c, p.omega_r, 1e-10);
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(10, 10)).norm() < 1e-8);
    CHECK_THROWS_AS(period_propagator(s.energies.head(10), c, 0.0, 1e-10), ValidationError);
}

TEST_CASE("undriven quasienergies are bare energies folded into one zone") {
    const CircuitParams p = table_q1().at_flux(0.9);
    const auto s = diagonalize_ist(p, 8);
    const double wd = p.omega_r;
    const auto f = floquet_quasienergies(s, p, {0.0}, 8, SemiclassicalModel::renormalized, wd);
    REQUIRE(f.quasienergies.size() == 1);
    for (int k = 0; k < 8; ++k) {
        const double q = f.quasienergies[0][k];
        CHECK(q > -0.5 * wd);
        CHECK(q <= 0.5 * wd);
        CHECK(std::abs(std::remainder(q - s.energies(k), wd)) < 1e-9);
        CHECK(f.branch_labels[0][k] == k);
    }
    CHECK(f.max_unitarity_defect < 1e-8);
    CHECK_THROWS_AS(floquet_quasienergies(s, p, {1.0, 0.5}, 8, SemiclassicalModel::simple, wd), ValidationError);
    CHECK_THROWS_AS(floquet_quasienergies(s, p, {}, 8, SemiclassicalModel::simple, wd), ValidationError);
}

TEST_CASE("renormalized branches track the dressed strip levels") {
    const CircuitParams p = table_q2().at_flux(pi);
    const auto s = diagonalize_ist(p, 10);
    const auto c = build_composite(p, s, 10, 10);
    const double wd = dressed_resonator_frequency(c, 0);
    const double chi = std::abs(numeric_chi_and_lamb(c).chi);
    const std::vector<double> grid{1.0, 2.0, 3.0, 4.0, 6.0, 8.0};
    const auto f = floquet_quasienergies(s, p, grid, 10, SemiclassicalModel::renormalized, wd);
    auto split = [&](std::size_t j) { return std::remainder(f.quasienergies[j][1] - f.quasienergies[j][0], wd); };
    auto dressed = [&](int n) { return c.energy(1, n) - c.energy(0, n); };
    for (std::size_t j = 1; j < grid.size(); ++j) {
        const int n = static_cast<int>(grid[j]);
        // both ladders are referenced to one photon: the classical drive carries no vacuum shift
        const double floquet = split(j) - split(0);
        const double strip = dressed(n) - dressed(1);
        INFO("n=" << n << " floquet=" << floquet << " strip=" << strip << " chi=" << chi);
        CHECK(std::abs(floquet - strip) < 2.0 * chi);
    }
}

}
