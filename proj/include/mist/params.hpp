#pragma once

#include <cmath>
#include <numbers>

namespace mist {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Constants {
    static constexpr double h = 6.62607015e-34;          // J s
    static constexpr double e_charge = 1.602176634e-19;  // C
    static constexpr double hbar = h / two_pi;
    static constexpr double phi_0 = h / (2.0 * e_charge);  // Wb
};

// All energies are E/h and all frequencies are linear, both in GHz.
// Time is in ns, so 2*pi*f*t is a phase in radians.
struct CircuitParams {
    double e_c = 0.0;
    double e_j = 0.0;
    double e_l = 0.0;
    double omega_r = 0.0;
    double k_eff = 0.0;
    double kappa_r = 0.0;
    double phi_ext = 0.0;  // 2*pi*Phi_ext/Phi_0

    void validate() const;

    [[nodiscard]] CircuitParams at_flux(double phi) const {
        CircuitParams p = *this;
        p.phi_ext = phi;
        return p;
    }

    // sqrt(2 E_C / E_L), the harmonic impedance of the shunt alone
    [[nodiscard]] double xi_l() const { return std::sqrt(2.0 * e_c / e_l); }

    bool operator==(const CircuitParams&) const = default;
};

// Reference devices Q1 and Q2, with their measured kappa_r.
inline CircuitParams table_q1() { return {0.398, 6.374, 7.142, 4.523, 0.03568, 3.639e-3, 0.0}; }
inline CircuitParams table_q2() { return {0.198, 4.519, 8.859, 4.111, 0.07590, 6.376e-3, 0.0}; }

}  // namespace mist
