#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "mist/errors.hpp"
#include "mist/ode.hpp"

using namespace mist;

TEST_SUITE("ode") {

TEST_CASE("exponential decay to the requested tolerance") {
    Dopri5<Eigen::VectorXd> ode({.atol = 1e-10});
    Eigen::VectorXd y(1);
    y << 1.0;
    auto f = [](double, const Eigen::VectorXd& v) -> Eigen::VectorXd { return -v; };
    auto norm = [](const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); };
    ode.integrate(f, 0.0, 5.0, y, norm);
    CHECK(std::abs(y(0) - std::exp(-5.0)) < 1e-8);
    CHECK(ode.stats().accepted > 0);
}

TEST_CASE("harmonic oscillator conserves energy over many periods") {
    Dopri5<Eigen::Vector2d> ode({.atol = 1e-11});
    Eigen::Vector2d y(1.0, 0.0);
    auto f = [](double, const Eigen::Vector2d& v) -> Eigen::Vector2d { return {v(1), -v(0)}; };
    auto norm = [](const Eigen::Vector2d& v) { return v.cwiseAbs().maxCoeff(); };
    const double t1 = 20.0 * 2.0 * M_PI;
    ode.integrate(f, 0.0, t1, y, norm);
    CHECK(std::abs(y(0) - 1.0) < 1e-7);
    CHECK(std::abs(y(1)) < 1e-7);
}

TEST_CASE("segmented integration lands on the same answer") {
    auto f = [](double t, const Eigen::VectorXd& v) -> Eigen::VectorXd { return std::cos(t) * v; };
    auto norm = [](const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); };
    Eigen::VectorXd a = Eigen::VectorXd::Ones(1), b = a;
    Dopri5<Eigen::VectorXd> one({.atol = 1e-12});
    one.integrate(f, 0.0, 3.0, a, norm);
    Dopri5<Eigen::VectorXd> many({.atol = 1e-12});
    for (int i = 0; i < 30; ++i) many.integrate(f, 0.1 * i, 0.1 * (i + 1), b, norm);
    CHECK(std::abs(a(0) - std::exp(std::sin(3.0))) < 1e-10);
    CHECK(std::abs(b(0) - std::exp(std::sin(3.0))) < 1e-10);
}

TEST_CASE("post hook may modify the state") {
    Dopri5<Eigen::VectorXd> ode({.atol = 1e-10});
    Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
    auto f = [](double, const Eigen::VectorXd& v) -> Eigen::VectorXd { return -v; };
    auto norm = [](const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); };
    int calls = 0;
    ode.integrate(f, 0.0, 1.0, y, norm, [&](double, Eigen::VectorXd& v) {
        v(1) = v(0);
        ++calls;
    });
    CHECK(calls == ode.stats().accepted);
    CHECK(y(0) == y(1));
    CHECK(std::abs(y(0) - std::exp(-1.0)) < 1e-8);
}

TEST_CASE("fixed-step rk4 is fourth order") {
    auto f = [](double, const Eigen::VectorXd& v) -> Eigen::VectorXd { return -v; };
    auto err = [&](long n) {
        Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
        rk4(f, 0.0, 1.0, y, n);
        return std::abs(y(0) - std::exp(-1.0));
    };
    const double ratio = err(20) / err(40);
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
}

TEST_CASE("stiff blow-up is reported") {
    Dopri5<Eigen::VectorXd> ode({.atol = 1e-10, .min_step = 1e-6, .max_steps = 2000});
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
    auto f = [](double t, const Eigen::VectorXd& v) -> Eigen::VectorXd { return v / ((1.0 - t) * (1.0 - t)); };
    auto norm = [](const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); };
    CHECK_THROWS_AS(ode.integrate(f, 0.0, 2.0, y, norm), IntegratorError);
    CHECK_THROWS_AS(ode.integrate(f, 1.0, 0.0, y, norm), IntegratorError);
}

}
