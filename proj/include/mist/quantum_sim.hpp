#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mist/composite.hpp"
#include "mist/ode.hpp"

namespace mist {

// Square pulse: amplitude epsilon at carrier omega_d on [0, t_on), then free ringdown for t_off.
struct DriveProtocol {
    double epsilon = 0.0;  // GHz
    double omega_d = 0.0;  // GHz
    double t_on = 0.0;     // ns
    double t_off = 0.0;    // ns

    void validate() const;
    [[nodiscard]] double epsilon_at(double t) const { return t < t_on ? epsilon : 0.0; }
    [[nodiscard]] double duration() const { return t_on + t_off; }
};

// 1/kappa in ns for a linear kappa in GHz.
[[nodiscard]] double decay_time(double kappa_r);

// t_on = on_mult / kappa, t_off = off_mult / kappa with kappa angular.
DriveProtocol square_protocol(double epsilon, double omega_d, double kappa_r, double on_mult = 10.0,
                              double off_mult = 10.0);

// epsilon = kappa sqrt(n_bar) / 2
double amplitude_for_photons(double n_bar, double kappa_r);

struct Truncation {
    int n_res_levels = 0;
    int n_ist_levels = 0;
};
Truncation truncation_plan(double n_bar, int init_state);

struct LindbladOptions {
    double atol = 1e-8;  // per-step local error, bounded in trace norm
    double trace_tolerance = 1e-6;
    int n_samples = 64;
};

struct TrajectorySample {
    double t = 0.0;
    double photons = 0.0;
    double trace = 0.0;
    Eigen::VectorXd populations;  // dressed qubit label populations
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    Eigen::MatrixXcd rho_dressed;  // final state, Schrodinger picture, dressed eigenbasis
    double n_bar_end_on = 0.0;
    double dn_dt_end_on = 0.0;  // 1/ns
    double max_trace_drift = 0.0;
    double max_hermiticity_defect = 0.0;
    double min_diagonal = 0.0;
    OdeStats stats;
};

// Dressed-basis operators used by the master equation.
struct DressedOperators {
    Eigen::VectorXd energies;     // eigenvalues of the composite, GHz
    Eigen::MatrixXcd a;           // V^dag (I (x) a) V
    Eigen::MatrixXcd lowering;    // strictly energy-lowering part of a
    Eigen::MatrixXcd number;      // V^dag (I (x) n) V
    std::vector<int> qubit_label;  // per eigen index
};
DressedOperators dressed_operators(const CompositeSpace& space);

// Integrates the driven master equation starting from the dressed state labeled (init_k, 0).
Trajectory evolve_lindblad(const CompositeSpace& space, const DriveProtocol& protocol, double kappa_r, int init_k,
                           const LindbladOptions& options = {});

// Dressed density matrix mapped to the product basis and traced over the resonator.
Eigen::VectorXd bare_qubit_populations(const CompositeSpace& space, const Eigen::MatrixXcd& rho_dressed);

struct MistResult {
    int init_label = 0;
    double n_bar = 0.0;
    double phi_ext = 0.0;
    double omega_d = 0.0;
    Eigen::VectorXd populations;       // dressed qubit labels, used for leakage
    Eigen::VectorXd bare_populations;  // bare IST eigenbasis after tracing out the resonator
    double leakage = 0.0;
    double n_bar_achieved = 0.0;
    bool steady_state_reached = true;
    int n_ist_levels = 0;
    int n_res_levels = 0;
    double runtime_s = 0.0;
    std::string backend;
};

struct QuantumOptions {
    std::optional<int> n_ist_levels;
    std::optional<int> n_res_levels;
    std::optional<double> kappa_r;  // overrides params.kappa_r
    double on_mult = 10.0;
    double off_mult = 10.0;
    LindbladOptions lindblad;
};

// params.phi_ext is the operating flux.
MistResult mist_quantum(const CircuitParams& params, double n_bar, int init_state, const QuantumOptions& options = {});

std::string to_json(const MistResult& r);

}  // namespace mist
