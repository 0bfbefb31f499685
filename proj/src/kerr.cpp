#include "mist/kerr.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "mist/errors.hpp"

namespace mist {

std::array<double, 2> kerr_residuals(const CircuitParams& p, double xi, double phi_star) {
    const double pe = p.phi_ext - phi_star;
    const double ej_eff = p.e_j * std::exp(-0.5 * xi);
    const double f1 = -ej_eff * std::sin(pe) + p.e_l * phi_star;
    const double xl = xi / p.xi_l();
    // (xi/xi_J)^2 = xi^2 E_J / (2 E_C)
    const double f2 = xl * xl + xi * xi * p.e_j / (2.0 * p.e_c) * std::exp(-0.5 * xi) * std::cos(pe) - 1.0;
    return {f1, f2};
}

namespace {

double wrap_pi(double x) {
    const double pi = std::numbers::pi;
    x = std::remainder(x, 2.0 * pi);
    if (x <= -pi) x += 2.0 * pi;
    return x;
}

struct InnerRoot {
    double phi = 0.0;
    int count = 0;
};

// Roots of E_L phi - A sin(phi_ext - phi) on (-pi, pi].
InnerRoot inner_phi(const CircuitParams& p, double xi) {
    const double pi = std::numbers::pi;
    const double a = p.e_j * std::exp(-0.5 * xi);
    auto f = [&](double x) { return p.e_l * x - a * std::sin(p.phi_ext - x); };
    auto bisect = [&](double lo, double hi) {
        double flo = f(lo);
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = f(mid);
            if (fm == 0.0) return mid;
            if ((flo < 0.0) == (fm < 0.0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };
    if (a < p.e_l) return {bisect(-pi, pi), 1};  // f monotone, f(-pi) < 0 < f(pi)

    constexpr int n = 4000;
    InnerRoot r;
    double prev_x = -pi, prev_f = f(-pi);
    for (int i = 1; i <= n; ++i) {
        const double x = -pi + 2.0 * pi * i / n;
        const double fx = f(x);
        if ((prev_f < 0.0) != (fx < 0.0) || fx == 0.0) {
            const double root = bisect(prev_x, x);
            // keep only minima of the effective potential
            if (p.e_l + a * std::cos(p.phi_ext - root) > 0.0) {
                if (r.count == 0 || std::abs(root - r.phi) > 1e-9) {
                    ++r.count;
                    r.phi = root;
                }
            }
        }
        prev_x = x;
        prev_f = fx;
    }
    return r;
}

double outer_f(const CircuitParams& p, double xi, int* roots) {
    const InnerRoot r = inner_phi(p, xi);
    if (roots) *roots = r.count;
    return kerr_residuals(p, xi, r.phi)[1];
}

}  // namespace

Displacement solve_displacement_impedance(const CircuitParams& params) {
    params.validate();
    const CircuitParams p = params.at_flux(wrap_pi(params.phi_ext));
    if (p.e_j == 0.0) return {p.xi_l(), 0.0};

    // (xi, 0) is negative; locate the first upward crossing on a geometric grid.
    const double xl = p.xi_l();
    double lo = 1e-6 * xl, hi = 0.0;
    int roots = 0;
    double flo = outer_f(p, lo, &roots);
    constexpr int n = 400;
    const double top = std::max(20.0, 4.0 * xl);
    for (int i = 1; i <= n; ++i) {
        const double x = lo * std::pow(top / lo, static_cast<double>(i) / n);
        const double fx = outer_f(p, x, &roots);
        if (roots > 1) throw RegimeError("Kerr approximation fails: multiple potential minima (double-well regime)");
        if (roots == 0) throw RegimeError("Kerr approximation fails: no stable displacement");
        if (flo < 0.0 && fx >= 0.0) {
            hi = x;
            break;
        }
        lo = x;
        flo = fx;
    }
    if (hi == 0.0) throw RegimeError("Kerr approximation fails: no impedance root");

    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = outer_f(p, mid, nullptr);
        if (fm < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double xi = 0.5 * (lo + hi);
    const InnerRoot r = inner_phi(p, xi);
    if (r.count != 1) throw RegimeError("Kerr approximation fails: multiple potential minima (double-well regime)");
    double ph = r.phi;

    // Newton polish on the joint system
    const double ej_over = p.e_j / (2.0 * p.e_c);
    for (int it = 0; it < 8; ++it) {
        const auto f = kerr_residuals(p, xi, ph);
        if (std::abs(f[0]) < 1e-15 && std::abs(f[1]) < 1e-15) break;
        const double pe = p.phi_ext - ph;
        const double ex = std::exp(-0.5 * xi);
        const double j11 = 0.5 * p.e_j * ex * std::sin(pe);
        const double j12 = p.e_j * ex * std::cos(pe) + p.e_l;
        const double j21 = 2.0 * xi / (xl * xl) + ej_over * (2.0 * xi - 0.5 * xi * xi) * ex * std::cos(pe);
        const double j22 = ej_over * xi * xi * ex * std::sin(pe);
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0) break;
        const double dxi = (f[0] * j22 - f[1] * j12) / det;
        const double dph = (j11 * f[1] - j21 * f[0]) / det;
        const auto trial = kerr_residuals(p, xi - dxi, ph - dph);
        if (std::abs(trial[0]) + std::abs(trial[1]) >= std::abs(f[0]) + std::abs(f[1])) break;
        xi -= dxi;
        ph -= dph;
    }
    if (p.e_l + p.e_j * std::exp(-0.5 * xi) * std::cos(p.phi_ext - ph) <= 0.0)
        throw RegimeError("Kerr approximation fails: displacement is not a minimum");
    return {xi, ph};
}

BareKerr bare_kerr_params(const CircuitParams& params, double xi, double /*phi_star*/) {
    params.validate();
    if (!(xi > 0.0)) throw ValidationError("xi must be > 0");
    return {4.0 * params.e_c / xi, params.e_c - 0.5 * params.e_l * xi * xi};
}

DressedKerr dressed_kerr_params(const CircuitParams& params, double xi, double phi_star, double w0, double e0) {
    params.validate();
    const double guard = 10.0 * std::abs(e0);
    for (const double c : {1.0, 1.5, 2.0, 2.5, 3.0, 3.5}) {
        if (std::abs(w0 - c * e0) <= guard && e0 != 0.0) {
            std::ostringstream os;
            os << "Kerr dressing singular: denominator omega_0 - " << c << " eta_0 = " << (w0 - c * e0)
               << " GHz within 10|eta_0|";
            throw SingularityError(os.str());
        }
    }
    const double t = std::tan(params.phi_ext - phi_star);
    const double t2 = t * t;
    const double e2 = e0 * e0;
    const double wq = w0 - 7.0 * e2 / (24.0 * (w0 - 1.5 * e0)) - 5.0 * e2 / (24.0 * (w0 - 2.5 * e0)) -
                      16.0 * e2 * t2 / (9.0 * xi * (w0 - e0)) - 8.0 * e2 * t2 / (9.0 * xi * (w0 - 2.0 * e0));
    const double eq = e0 - 5.0 * e2 / (8.0 * (w0 - 1.5 * e0)) + 5.0 * e2 / (8.0 * (w0 - 3.5 * e0)) +
                      9.0 * e2 / (4.0 * (w0 - 2.5 * e0)) - 52.0 * e2 * t2 / (9.0 * xi * (w0 - e0)) +
                      20.0 * e2 * t2 / (9.0 * xi * (w0 - 3.0 * e0)) + 92.0 * e2 * t2 / (9.0 * xi * (w0 - 2.0 * e0));
    return {wq, eq};
}

double coupling_strength(const CircuitParams& params, double xi) {
    return params.k_eff * std::sqrt(params.omega_r * params.e_c / xi);
}

double dispersive_shift(double wq, double eq, double wr, double g) {
    const double w21 = wq - eq;
    const double d1 = wr * wr - w21 * w21;
    const double d2 = wr * wr - wq * wq;
    const double scale = wr * wr * 1e-12;
    if (std::abs(d1) < scale || std::abs(d2) < scale)
        throw SingularityError("dispersive shift singular: resonator resonant with a qubit transition");
    const double two_chi = 4.0 * g * g * (w21 / d1 - wq / d2);
    return 0.5 * two_chi;
}

double cubic_ratio(double xi, double phi_ext_star, double w0, double e0) {
    return std::abs(e0 * std::tan(phi_ext_star)) / (std::sqrt(xi) * w0);
}

KerrParams kerr_params(const CircuitParams& params) {
    const Displacement s = solve_displacement_impedance(params);
    KerrParams k;
    k.xi = s.xi;
    k.phi_star = s.phi_star;
    k.phi_ext_star = std::remainder(params.phi_ext - s.phi_star, two_pi);
    const BareKerr b = bare_kerr_params(params, s.xi, s.phi_star);
    k.omega_0 = b.omega_0;
    k.eta_0 = b.eta_0;
    const double c3 = cubic_ratio(s.xi, k.phi_ext_star, b.omega_0, b.eta_0);
    if (c3 > cubic_ratio_limit) {
        std::ostringstream os;
        os << "Kerr approximation fails: cubic coupling " << c3 << " of omega_0 exceeds " << cubic_ratio_limit;
        throw RegimeError(os.str());
    }
    const DressedKerr d = dressed_kerr_params(params, s.xi, s.phi_star, b.omega_0, b.eta_0);
    k.omega_q = d.omega_q;
    k.eta_q = d.eta_q;
    k.g_qr = coupling_strength(params, s.xi);
    k.residuals = kerr_residuals(params, s.xi, s.phi_star);
    return k;
}

}  // namespace mist
