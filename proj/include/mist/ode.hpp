#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mist/errors.hpp"

namespace mist {

struct OdeOptions {
    double atol = 1e-8;
    double rtol = 0.0;
    double initial_step = 0.0;  // <= 0 picks one from the first derivative
    double min_step = 1e-13;
    double max_step = 0.0;  // <= 0 means unbounded
    long max_steps = 50'000'000;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_calls = 0;
};

// Dormand-Prince 5(4) with FSAL and an I-controller.
// State needs +, -, scalar * and a copy constructor; Eigen matrices and vectors qualify.
// Norm maps an error estimate to a non-negative scalar.
template <class State>
class Dopri5 {
public:
    explicit Dopri5(OdeOptions opt = {}) : opt_(opt) {}

    // Advances y from t0 to t1. post(t, y) runs after every accepted step and may modify y.
    template <class Rhs, class Norm, class Post>
    void integrate(Rhs&& f, double t0, double t1, State& y, Norm&& norm, Post&& post) {
        run(f, t0, t1, y, norm, post, true);
    }

    template <class Rhs, class Norm>
    void integrate(Rhs&& f, double t0, double t1, State& y, Norm&& norm) {
        run(f, t0, t1, y, norm, [](double, State&) {}, false);
    }

    [[nodiscard]] const OdeStats& stats() const { return stats_; }
    [[nodiscard]] double step() const { return h_; }

private:
    template <class Rhs, class Norm, class Post>
    void run(Rhs& f, double t0, double t1, State& y, Norm& norm, Post&& post, bool post_modifies) {
        if (t1 == t0) return;
        if (t1 < t0) throw IntegratorError("backward integration is not supported");
        double t = t0;
        State k1 = f(t, y);
        ++stats_.rhs_calls;
        if (h_ <= 0.0) h_ = opt_.initial_step > 0.0 ? opt_.initial_step : first_step(y, k1, norm, t1 - t0);
        State k2, k3, k4, k5, k6, k7, yn, err;
        while (t < t1) {
            if (stats_.accepted + stats_.rejected > opt_.max_steps) throw IntegratorError("step budget exhausted");
            bool last = false;
            double h = h_;
            if (opt_.max_step > 0.0) h = std::min(h, opt_.max_step);
            if (t + h >= t1 || t1 - (t + h) < 1e-12 * std::abs(t1)) {
                h = t1 - t;
                last = true;
            }
            k2 = f(t + c2 * h, y + h * (a21 * k1));
            k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
            k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            yn = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            k7 = f(t + h, yn);
            stats_.rhs_calls += 6;
            err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double scale = opt_.atol + opt_.rtol * std::max(norm(y), norm(yn));
            const double ratio = norm(err) / scale;
            if (!std::isfinite(ratio)) throw IntegratorError("non-finite error estimate");
            if (ratio <= 1.0) {
                t = last ? t1 : t + h;
                y = std::move(yn);
                post(t, y);
                // post may alter y, so FSAL only holds when it did not
                k1 = post_modifies ? f(t, y) : std::move(k7);
                if (post_modifies) ++stats_.rhs_calls;
                ++stats_.accepted;
                const double fac = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
                // keep the step learned before a clipped final step
                if (!last || h >= h_) h_ = h * fac;
            } else {
                ++stats_.rejected;
                h_ = h * std::max(0.2, 0.9 * std::pow(ratio, -0.2));
                if (h_ < opt_.min_step) {
                    std::ostringstream os;
                    os << "step size underflow (h = " << h_ << " ns at t = " << t << " ns); problem is too stiff";
                    throw IntegratorError(os.str());
                }
            }
        }
    }

    template <class Norm>
    double first_step(const State& y, const State& dy, Norm& norm, double span) const {
        const double d0 = norm(y), d1 = norm(dy);
        double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, std::pow(opt_.atol, 0.2) * (d1 > 0.0 ? 1.0 / d1 : 1.0));
        return std::clamp(h, 1e3 * opt_.min_step, span);
    }

    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    OdeOptions opt_;
    OdeStats stats_;
    double h_ = 0.0;
};

// Classical fixed-step fourth-order Runge-Kutta.
template <class State, class Rhs>
void rk4(Rhs&& f, double t0, double t1, State& y, long steps) {
    if (steps < 1) throw IntegratorError("rk4 needs at least one step");
    const double h = (t1 - t0) / static_cast<double>(steps);
    for (long i = 0; i < steps; ++i) {
        const double t = t0 + h * static_cast<double>(i);
        const State k1 = f(t, y);
        const State k2 = f(t + 0.5 * h, y + (0.5 * h) * k1);
        const State k3 = f(t + 0.5 * h, y + (0.5 * h) * k2);
        const State k4 = f(t + h, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
}

}  // namespace mist
