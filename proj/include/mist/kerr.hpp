#pragma once

#include <array>

#include "mist/params.hpp"

namespace mist {

struct Displacement {
    double xi = 0.0;
    double phi_star = 0.0;
};

struct KerrParams {
    double xi = 0.0;
    double phi_star = 0.0;
    double phi_ext_star = 0.0;  // phi_ext - phi_star
    double omega_0 = 0.0;
    double eta_0 = 0.0;
    double omega_q = 0.0;
    double eta_q = 0.0;
    double g_qr = 0.0;
    std::array<double, 2> residuals{};
};

// Left-hand sides of the two stationarity conditions; zero at the solution.
std::array<double, 2> kerr_residuals(const CircuitParams& params, double xi, double phi_star);

// Throws RegimeError when there is no single-well root in (-pi, pi].
Displacement solve_displacement_impedance(const CircuitParams& params);

struct BareKerr {
    double omega_0 = 0.0;
    double eta_0 = 0.0;
};
BareKerr bare_kerr_params(const CircuitParams& params, double xi, double phi_star);

struct DressedKerr {
    double omega_q = 0.0;
    double eta_q = 0.0;
};
// Throws SingularityError when a denominator omega_0 - c eta_0 is within 10 |eta_0| of zero.
DressedKerr dressed_kerr_params(const CircuitParams& params, double xi, double phi_star, double omega_0, double eta_0);

// g_qr = k_eff sqrt(omega_r E_C / xi)
double coupling_strength(const CircuitParams& params, double xi);

// chi, half of the two-bracket 2chi expression
double dispersive_shift(double omega_q, double eta_q, double omega_r, double g_qr);

// Size of the dropped cubic term relative to omega_0.
double cubic_ratio(double xi, double phi_ext_star, double omega_0, double eta_0);
inline constexpr double cubic_ratio_limit = 0.1;

// Full chain. Throws RegimeError if the cubic term is too large to treat
// perturbatively, SingularityError from the dressing step.
KerrParams kerr_params(const CircuitParams& params);

}  // namespace mist
