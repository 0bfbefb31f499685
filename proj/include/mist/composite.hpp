#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mist/circuit.hpp"

namespace mist {

struct DressedLabel {
    int k = -1;  // qubit label
    int n = -1;  // photon label
    double overlap = 0.0;
    bool ambiguous = false;
};

inline constexpr double ambiguity_threshold = 0.5;

// Product basis index = k * n_res_levels + n.
struct CompositeSpace {
    int n_ist_levels = 0;
    int n_res_levels = 0;
    double omega_r = 0.0;
    double coupling_prefactor = 0.0;  // 2 k_eff sqrt(omega_r E_C), GHz
    Eigen::VectorXd qubit_energies;
    Eigen::MatrixXcd hamiltonian;  // GHz
    Eigen::MatrixXcd coupling_op;  // g (x) (a + a^dag), without the prefactor
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXcd eigenvectors;     // columns, in the product basis
    std::vector<DressedLabel> labels;  // by eigen index
    std::vector<int> eigen_of_label;   // by product index

    [[nodiscard]] int dim() const { return n_ist_levels * n_res_levels; }
    [[nodiscard]] int product_index(int k, int n) const { return k * n_res_levels + n; }
    [[nodiscard]] int eigen_index(int k, int n) const { return eigen_of_label.at(product_index(k, n)); }
    [[nodiscard]] double energy(int k, int n) const { return eigenvalues(eigen_index(k, n)); }
    [[nodiscard]] const DressedLabel& label(int k, int n) const { return labels.at(eigen_index(k, n)); }
};

// Resonator lowering operator on the n_res-level Fock space.
Eigen::MatrixXd annihilation(int n_res_levels);

CompositeSpace build_composite(const CircuitParams& params, const QubitSpectrum& spectrum, int n_ist_levels,
                               int n_res_levels);

// Greedy by descending |overlap|^2 with bare product states.
std::vector<DressedLabel> dressed_labels(const CompositeSpace& space);

struct StripLevel {
    int k = 0;
    int n = 0;
    double energy = 0.0;  // E(k, n) - n omega_r
};

std::vector<StripLevel> rwa_strip_energies(const CompositeSpace& space, int n_total);

// E(k,1) - E(k,0); throws RangeError if either label is ambiguous.
double dressed_resonator_frequency(const CompositeSpace& space, int k);

struct ChiLamb {
    double chi = 0.0;
    double lamb_shift = 0.0;
};
ChiLamb numeric_chi_and_lamb(const CompositeSpace& space);

// Points where the labeled states |a, N-a> and |b, N-b> exchange order as N grows.
struct StripCrossing {
    int k_a = 0;
    int k_b = 0;
    double photons = 0.0;  // photon label of |k_a, .> at the crossing, interpolated
    double gap = 0.0;      // upper estimate from the two bracketing strips, GHz
};

// One photon step moves a real crossing by its slope plus the splitting; sign flips with a larger jump
// (GHz) come from labels reshuffling among strongly mixed states and are dropped.
std::vector<StripCrossing> strip_crossings(const CompositeSpace& space, int k_a, int k_b, double max_jump = 0.25);

}  // namespace mist
