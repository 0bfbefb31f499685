#include <doctest.h>

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "mist/errors.hpp"
#include "mist/quantum_sim.hpp"
#include "oracles.hpp"

using namespace mist;

namespace {

CompositeSpace small_space(double k_eff, int nq, int nr, double phi = 0.4) {
    CircuitParams p = table_q1().at_flux(phi);
    p.k_eff = k_eff;
    const auto s = diagonalize_ist(p, nq);
    return build_composite(p, s, nq, nr);
}

}  // namespace

TEST_SUITE("quantum_sim") {

TEST_CASE("truncation plan") {
    CHECK(truncation_plan(0.0, 0).n_res_levels == 2);
    CHECK(truncation_plan(25.0, 0).n_res_levels == 42);
    CHECK(truncation_plan(1.0, 0).n_res_levels == 6);
    CHECK(truncation_plan(4.0, 0).n_ist_levels == 18);
    CHECK(truncation_plan(4.0, 1).n_ist_levels == 24);
    CHECK_THROWS_AS(truncation_plan(-1.0, 0), ValidationError);
    CHECK_THROWS_AS(truncation_plan(1.0, 2), ValidationError);
}

TEST_CASE("drive amplitude and protocol timing") {
    CHECK(amplitude_for_photons(4.0, 0.01) == doctest::Approx(0.01));
    const auto pr = square_protocol(0.1, 5.0, 0.01);
    CHECK(pr.t_on == doctest::Approx(10.0 / (2.0 * M_PI * 0.01)));
    CHECK(pr.t_off == doctest::Approx(pr.t_on));
    CHECK(pr.epsilon_at(0.5 * pr.t_on) == 0.1);
    CHECK(pr.epsilon_at(pr.t_on) == 0.0);
    CHECK_THROWS_AS(square_protocol(0.1, -1.0, 0.01), ValidationError);
    CHECK_THROWS_AS((void)decay_time(0.0), ValidationError);
}

TEST_CASE("uncoupled resonator fills and empties as a driven damped oscillator") {
    const auto space = small_space(0.0, 2, 22);
    const double kappa = 0.02, n_bar = 6.0;
    const auto pr = square_protocol(amplitude_for_photons(n_bar, kappa), space.omega_r, kappa);
    const auto tr = evolve_lindblad(space, pr, kappa, 0, {.atol = 1e-10, .n_samples = 40});
    const double k_ang = 2.0 * M_PI * kappa;
    for (const auto& s : tr.samples) {
        if (s.t > pr.t_on) continue;
        const double expect = n_bar * std::pow(1.0 - std::exp(-0.5 * k_ang * s.t), 2);
        CHECK(std::abs(s.photons - expect) < 5e-3 * n_bar);
    }
    CHECK(tr.n_bar_end_on == doctest::Approx(n_bar * std::pow(1.0 - std::exp(-5.0), 2)).epsilon(5e-3));
    CHECK(tr.samples.back().photons < std::exp(-10.0) * n_bar + 1e-6);
    CHECK(tr.max_trace_drift < 1e-7);
    CHECK(tr.samples.back().populations(0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("no drive means no leakage") {
    const auto space = small_space(0.03568, 6, 4);
    const auto pr = square_protocol(0.0, dressed_resonator_frequency(space, 0), 0.01, 2.0, 2.0);
    const auto tr = evolve_lindblad(space, pr, 0.01, 0);
    CHECK(1.0 - tr.samples.back().populations(0) < 1e-9);
    CHECK(tr.max_trace_drift < 1e-7);
}

TEST_CASE("adaptive solver matches the fixed-step bare-frame oracle") {
    const auto space = small_space(0.03568, 3, 5, 1.2);
    const double kappa = 0.05;
    const double wd = dressed_resonator_frequency(space, 0);
    const auto pr = square_protocol(amplitude_for_photons(1.0, kappa), wd, kappa, 4.0, 4.0);
    const auto tr = evolve_lindblad(space, pr, kappa, 0, {.atol = 1e-11, .n_samples = 8});
    const auto ref = oracle::rk4_lindblad(space, pr, kappa, 0, 5e-4);
    const Eigen::VectorXd pops = tr.samples.back().populations;
    CHECK((pops - ref.dressed_populations).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((bare_qubit_populations(space, tr.rho_dressed) - ref.bare_populations).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(tr.samples.back().trace - 1.0) < 1e-7);
    CHECK(tr.max_hermiticity_defect < 1e-9);
    CHECK(tr.min_diagonal > -1e-9);
}

TEST_CASE("runs are deterministic") {
    CircuitParams p = table_q2().at_flux(2.4);
    QuantumOptions o;
    o.n_ist_levels = 5;
    o.n_res_levels = 6;
    o.kappa_r = 0.03;
    o.on_mult = 3.0;
    o.off_mult = 3.0;
    const auto a = mist_quantum(p, 1.5, 0, o);
    const auto b = mist_quantum(p, 1.5, 0, o);
    CHECK(std::memcmp(&a.leakage, &b.leakage, sizeof(double)) == 0);
    CHECK(a.populations == b.populations);
    CHECK(a.bare_populations == b.bare_populations);
    CHECK(a.leakage >= 0.0);
    CHECK(a.leakage <= 1.0);
    CHECK(a.populations.sum() == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(a.bare_populations.sum() == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(a.omega_d == doctest::Approx(p.omega_r).epsilon(0.05));
}

TEST_CASE("excited start drives at the excited dressed frequency") {
    CircuitParams p = table_q1().at_flux(0.3);
    QuantumOptions o;
    o.n_ist_levels = 5;
    o.n_res_levels = 4;
    o.on_mult = 1.0;
    o.off_mult = 1.0;
    o.kappa_r = 0.05;
    const auto r = mist_quantum(p, 0.5, 1, o);
    const auto space = build_composite(p, diagonalize_ist(p, 5), 5, 4);
    CHECK(r.omega_d == doctest::Approx(dressed_resonator_frequency(space, 1)).epsilon(1e-14));
    CHECK(r.init_label == 1);
}

TEST_CASE("result json carries version and truncation") {
    MistResult r;
    r.backend = "quantum";
    r.populations = Eigen::VectorXd::Zero(2);
    r.bare_populations = Eigen::VectorXd::Zero(2);
    r.n_ist_levels = 18;
    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j.at("version").get<std::string>() == MIST_VERSION);
    CHECK(j.at("truncation").at("n_ist").get<int>() == 18);
    CHECK(j.at("population_basis").get<std::string>() == "dressed");
}

TEST_CASE("bad inputs are rejected") {
    const auto space = small_space(0.01, 3, 3);
    const auto pr = square_protocol(0.01, 4.5, 0.01, 1.0, 1.0);
    CHECK_THROWS_AS(evolve_lindblad(space, pr, 0.01, 3), ValidationError);
    CHECK_THROWS_AS(evolve_lindblad(space, pr, -0.01, 0), ValidationError);
    QuantumOptions o;
    o.kappa_r = 0.0;
    CHECK_THROWS_AS(mist_quantum(table_q1(), 1.0, 0, o), ValidationError);
}

}
