#pragma once

#include <Eigen/Dense>

#include "mist/params.hpp"

namespace mist {

struct QubitSpectrum {
    Eigen::VectorXd energies;          // ascending, energies[0] == 0
    Eigen::MatrixXcd charge_elements;  // <k|q|l>
    double ground_energy = 0.0;        // absolute, before subtraction
    double phi_ext = 0.0;
    int n_levels = 0;
    int basis_size = 0;
    bool converged = false;
    double max_shift = 0.0;  // GHz, between basis_size and basis_size + 8

    [[nodiscard]] double transition(int upper, int lower) const { return energies(upper) - energies(lower); }
};

// Matrix form of the bare qubit in the displaced oscillator basis
// phi = phi_star + sqrt(xi) (b + b^dag).
struct IstHamiltonian {
    Eigen::MatrixXd h;       // real symmetric, GHz
    Eigen::MatrixXd charge;  // q = i * charge, charge is real antisymmetric
    double xi = 0.0;
    double phi_star = 0.0;
    bool kerr_basis = true;  // false when the Kerr solver refused and the local minimum was used
};

// <m| exp(i sqrt(xi) (b + b^dag)) |n> for m, n < n; entries are exact, not truncated-basis exponentials.
Eigen::MatrixXcd displacement_elements(double xi, int n);

IstHamiltonian build_ist_hamiltonian(const CircuitParams& params, int basis_size);
IstHamiltonian build_ist_hamiltonian(const CircuitParams& params, int basis_size, double xi, double phi_star);

[[nodiscard]] int default_basis_size(int n_levels);

inline constexpr double convergence_tolerance_ghz = 1e-5;

// basis_size <= 0 picks default_basis_size(n_levels).
QubitSpectrum diagonalize_ist(const CircuitParams& params, int n_levels, int basis_size = 0,
                              bool check_convergence = true);

// omega10 at params.phi_ext without the convergence re-run
double omega10(const CircuitParams& params, int basis_size = 60);

enum class FluxBranch { upper_side, lower_side };

// phi_ext in [0, pi] with omega10 equal to target within 10 kHz.
double flux_for_frequency(const CircuitParams& params, double target_omega10, FluxBranch branch = FluxBranch::upper_side);

}  // namespace mist
