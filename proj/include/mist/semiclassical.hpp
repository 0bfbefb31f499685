#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mist/circuit.hpp"
#include "mist/quantum_sim.hpp"

namespace mist {

struct CoherentTrajectory {
    std::vector<double> times;                // ns
    std::vector<std::complex<double>> alpha;  // rotating frame of the drive
    double kappa_r = 0.0;
    std::vector<double> epsilon_profile;  // GHz
};

// Closed-form alpha for the square protocol, alpha(0) = 0, driven on resonance.
std::complex<double> alpha_at(const DriveProtocol& protocol, double kappa_r, double t);
CoherentTrajectory solve_alpha(const DriveProtocol& protocol, double kappa_r, const std::vector<double>& times);

enum class SemiclassicalModel { simple, renormalized };

// Prefactor 2 k_eff sqrt(omega_r E_C) shared by both models, GHz.
double semiclassical_coupling(const CircuitParams& params);

// H_int only; the bare diag(E_k) is added by callers. M levels 0..M-1 of the spectrum.
Eigen::MatrixXcd simple_interaction_hamiltonian(const QubitSpectrum& spectrum, const CircuitParams& params,
                                                double alpha_abs, double t, double omega_d, int m);
Eigen::MatrixXcd renormalized_interaction_hamiltonian(const QubitSpectrum& spectrum, const CircuitParams& params,
                                                      double alpha_abs, double t, double omega_d, int m);

// Time-independent coupling matrix C so that H_int(t) = C cos(2 pi omega_d t).
Eigen::MatrixXcd interaction_amplitude(const QubitSpectrum& spectrum, const CircuitParams& params, double alpha_abs,
                                       int m, SemiclassicalModel model);

struct SemiclassicalOptions {
    int m = 30;
    std::optional<double> kappa_r;
    std::optional<double> omega_d;  // default: dressed resonator frequency of the initial state
    int n_res_for_dressing = 0;     // <= 0 picks 4 resonator levels for the omega_d estimate
    double on_mult = 10.0;
    double off_mult = 10.0;
    double atol = 1e-10;
};

MistResult mist_semiclassical(const CircuitParams& params, double n_bar, int init_state, SemiclassicalModel model,
                              const SemiclassicalOptions& options = {});

struct FloquetCrossing {
    int k_a = 0;
    int k_b = 0;
    double photons = 0.0;  // |alpha|^2
    double gap = 0.0;      // GHz, upper estimate from the bracketing grid points
};

struct FloquetSpectrum {
    std::vector<double> photon_grid;
    double omega_d = 0.0;
    // [grid][branch], folded to (-omega_d/2, omega_d/2]
    std::vector<std::vector<double>> quasienergies;
    // adiabatic continuation: branch_labels[grid][branch] is the bare level the branch started from
    std::vector<std::vector<int>> branch_labels;
    // [grid][k] quasienergy of the Floquet mode with the largest weight on bare level k
    std::vector<std::vector<double>> diabatic;
    std::vector<FloquetCrossing> crossings;
    double max_unitarity_defect = 0.0;
};

struct FloquetOptions {
    double atol = 1e-10;
    double unitarity_tolerance = 1e-8;
    double max_jump = 0.05;  // GHz; larger folded-difference jumps are wraps, not crossings
};

FloquetSpectrum floquet_quasienergies(const QubitSpectrum& spectrum, const CircuitParams& params,
                                      const std::vector<double>& photon_grid, int m, SemiclassicalModel model,
                                      double omega_d, const FloquetOptions& options = {});

// One-period propagator of diag(E) + C cos(2 pi omega_d t).
Eigen::MatrixXcd period_propagator(const Eigen::VectorXd& energies, const Eigen::MatrixXcd& coupling, double omega_d,
                                   double atol);

}  // namespace mist
