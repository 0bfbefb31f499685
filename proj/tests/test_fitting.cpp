#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "mist/circuit.hpp"
#include "mist/errors.hpp"
#include "mist/fitting.hpp"

using namespace mist;

TEST_SUITE("fitting") {

TEST_CASE("transition names round-trip") {
    for (auto t : {Transition::omega10, Transition::omega21, Transition::omega_r})
        CHECK(transition_from_string(to_string(t)) == t);
    CHECK_THROWS_AS(transition_from_string("omega32"), ValidationError);
}

TEST_CASE("bias map inverts") {
    const BiasMap m{0.3, -1.7};
    for (double phi : {0.0, 1.0, 3.0}) CHECK(m.phi(m.bias(phi)) == doctest::Approx(phi).epsilon(1e-14));
}

TEST_CASE("synthetic data reproduce the model") {
    const BiasMap m{0.1, 2.0};
    const auto d = synthetic_dataset(table_q2(), m, 5, 3, 2);
    CHECK(d.count(Transition::omega10) == 5);
    CHECK(d.count(Transition::omega21) == 3);
    CHECK(d.count(Transition::omega_r) == 2);
    CHECK(d.points.front().frequency == doctest::Approx(omega10(table_q2())).epsilon(1e-9));
    const auto noisy = synthetic_dataset(table_q2(), m, 5, 3, 2, 1e-4, 3);
    const auto again = synthetic_dataset(table_q2(), m, 5, 3, 2, 1e-4, 3);
    for (std::size_t i = 0; i < d.points.size(); ++i) {
        CHECK(noisy.points[i].frequency == again.points[i].frequency);
        CHECK(std::abs(noisy.points[i].frequency - d.points[i].frequency) < 1e-3);
    }
}

TEST_CASE("seed lands near the truth") {
    const CircuitParams truth = table_q1();
    const auto d = synthetic_dataset(truth, {0.0, 1.0}, 12, 4, 4);
    const auto g = initial_guess(d);
    CHECK(std::abs(g.e_c / truth.e_c - 1.0) < 0.3);
    CHECK(std::abs(g.e_j / truth.e_j - 1.0) < 0.3);
    CHECK(std::abs(g.e_l / truth.e_l - 1.0) < 0.3);
    CHECK(std::abs(g.omega_r / truth.omega_r - 1.0) < 0.3);
}

TEST_CASE("harmonic data seed a junctionless circuit") {
    CircuitParams truth = table_q2();
    truth.e_j = 0.0;
    const auto d = synthetic_dataset(truth, {0.0, 1.0}, 6, 0, 3);
    const auto g = initial_guess(d);
    const double w = std::sqrt(8.0 * truth.e_c * truth.e_l);
    CHECK(g.e_j == 0.0);
    CHECK(g.e_c * g.e_l == doctest::Approx(w * w / 8.0).epsilon(1e-6));
}

TEST_CASE("seeding reports missing observables") {
    SpectroscopyDataset d;
    d.points.push_back({0.0, Transition::omega_r, 4.5, 1.0});
    CHECK_THROWS_AS(initial_guess(d), ValidationError);
    try {
        initial_guess(d);
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("omega10") != std::string::npos);
    }
}

TEST_CASE("invalid datasets are rejected") {
    SpectroscopyDataset d;
    d.points.push_back({0.0, Transition::omega10, -1.0, 1.0});
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d.points[0].frequency = 5.0;
    d.points[0].weight = 0.0;
    CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("fitting data generated from the seed returns the seed") {
    const CircuitParams seed = table_q2();
    const BiasMap m{0.0, 1.0};
    const auto d = synthetic_dataset(seed, m, 8, 3, 3);
    const auto r = fit_circuit(d, seed, m);
    CHECK(r.restarts <= 2);
    CHECK(r.rms_residual < 1e-6);
    CHECK(r.rms_residual >= 0.0);
    CHECK(r.residuals.size() == d.points.size());
    CHECK_NOTHROW(r.params.validate());
    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j.at("params").at("e_c_ghz").get<double>() == r.params.e_c);
    CHECK(j.at("covariance").size() == 7);
}

TEST_CASE("points near the qubit-resonator crossing are down-weighted") {
    const CircuitParams p = table_q1();
    const BiasMap m{0.0, 1.0};
    // Q1 crosses its resonator between the sweet spots
    const double phi_x = flux_for_frequency(p, p.omega_r);
    SpectroscopyDataset d;
    d.bias_map = m;
    d.points.push_back({m.bias(phi_x), Transition::omega10, p.omega_r, 1.0});
    d.points.push_back({m.bias(0.0), Transition::omega10, omega10(p), 1.0});
    const auto w = effective_weights(d, p, m);
    CHECK(w[0] == doctest::Approx(1e-2));
    CHECK(w[1] == 1.0);
}

TEST_CASE("dataset csv round trip") {
    const auto d = synthetic_dataset(table_q2(), {0.2, 3.0}, 4, 2, 2);
    const auto path = (std::filesystem::temp_directory_path() / "mist_fit_test.csv").string();
    d.to_csv(path);
    const auto back = SpectroscopyDataset::from_csv(path, d.bias_map);
    std::filesystem::remove(path);
    REQUIRE(back.points.size() == d.points.size());
    for (std::size_t i = 0; i < d.points.size(); ++i) {
        CHECK(back.points[i].bias == d.points[i].bias);
        CHECK(back.points[i].transition == d.points[i].transition);
        CHECK(back.points[i].frequency == d.points[i].frequency);
    }
    CHECK_THROWS_AS(SpectroscopyDataset::from_csv("/nonexistent/data.csv"), IoError);
}

}
