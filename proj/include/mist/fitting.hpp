#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mist/params.hpp"

namespace mist {

enum class Transition { omega10, omega21, omega_r };

std::string to_string(Transition t);
Transition transition_from_string(const std::string& s);

struct SpectroscopyPoint {
    double bias = 0.0;
    Transition transition = Transition::omega10;
    double frequency = 0.0;  // GHz
    double weight = 1.0;
};

// phi_ext = 2 pi (bias - offset) / period
struct BiasMap {
    double offset = 0.0;
    double period = 1.0;

    [[nodiscard]] double phi(double bias) const { return two_pi * (bias - offset) / period; }
    [[nodiscard]] double bias(double phi) const { return offset + period * phi / two_pi; }
};

struct SpectroscopyDataset {
    std::vector<SpectroscopyPoint> points;
    BiasMap bias_map;  // calibration guess; fitted values land in FitResult

    void validate() const;
    [[nodiscard]] int count(Transition t) const;

    // columns: bias, transition, freq_ghz, weight
    static SpectroscopyDataset from_csv(const std::string& path, BiasMap map = {});
    void to_csv(const std::string& path) const;
};

// Model prediction used by the fit. Basis size is fixed, no convergence re-run.
inline constexpr int fit_basis_size = 40;
double predict(const CircuitParams& params, const BiasMap& map, const SpectroscopyPoint& point);

// Noiseless when noise_ghz == 0. Flux samples evenly cover [0, pi].
SpectroscopyDataset synthetic_dataset(const CircuitParams& truth, const BiasMap& map, int n10 = 24, int n21 = 6,
                                      int nr = 6, double noise_ghz = 0.0, std::uint64_t seed = 1);

CircuitParams initial_guess(const SpectroscopyDataset& dataset);

struct FitOptions {
    int max_iterations = 6000;  // per simplex run
    int max_restarts = 8;
    double rel_tolerance = 1e-10;
    int stall_window = 20;
    double crossing_window = 3.0;  // in units of the qubit-resonator splitting
    double crossing_weight_factor = 1e-2;
};

struct FitResult {
    CircuitParams params;
    BiasMap bias_map;
    std::vector<double> residuals;  // GHz, model - data
    std::vector<double> weights;    // effective weights after crossing exclusion
    double rms_residual = 0.0;      // GHz, unweighted over all points
    double objective = 0.0;
    Eigen::MatrixXd covariance;  // order: e_c, e_j, e_l, omega_r, k_eff, offset, period
    int iterations = 0;
    int restarts = 0;
    bool converged = false;
    bool projected = false;  // a bound was hit and the parameter was clipped
};

// Weights with points near qubit-resonator crossings scaled down.
std::vector<double> effective_weights(const SpectroscopyDataset& dataset, const CircuitParams& params,
                                      const BiasMap& map, const FitOptions& options = {});

FitResult fit_circuit(const SpectroscopyDataset& dataset, const CircuitParams& seed, const FitOptions& options = {});
FitResult fit_circuit(const SpectroscopyDataset& dataset, const CircuitParams& seed, const BiasMap& seed_map,
                      const FitOptions& options = {});

std::string to_json(const FitResult& r);

}  // namespace mist
