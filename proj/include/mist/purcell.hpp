#pragma once

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "mist/circuit.hpp"

namespace mist {

inline constexpr double default_internal_q = 150'000.0;

// A two-terminal element. Values in SI: ohms, henries, farads.
struct Element {
    enum class Kind { resistor, inductor, capacitor, parallel_lcr, series_lcr };
    Kind kind = Kind::resistor;
    double r = 0.0;  // resistor value, or the loss resistance of an lcr
    double l = 0.0;
    double c = 0.0;

    static Element resistor(double r) { return {Kind::resistor, r, 0.0, 0.0}; }
    static Element inductor(double l) { return {Kind::inductor, 0.0, l, 0.0}; }
    static Element capacitor(double c) { return {Kind::capacitor, 0.0, 0.0, c}; }
    // Tank with internal quality factor q: shunt loss R = q sqrt(L/C).
    static Element tank(double l, double c, double q = default_internal_q);
    static Element parallel_lcr(double l, double c, double r) { return {Kind::parallel_lcr, r, l, c}; }
    static Element series_lcr(double l, double c, double r) { return {Kind::series_lcr, r, l, c}; }

    void validate() const;
    [[nodiscard]] std::complex<double> impedance(double omega_ang) const;
};

// Ladder seen from the qubit port. Stage 0 sits at the port; the far end is open.
struct Stage {
    enum class Placement { series, shunt };
    Placement placement = Placement::shunt;
    Element element;
};

struct ReadoutNetwork {
    std::vector<Stage> stages;

    void validate() const;
    ReadoutNetwork& series(const Element& e);
    ReadoutNetwork& shunt(const Element& e);
};

// omega in GHz (linear). Throws ValidationError for degenerate element values or an open port.
std::complex<double> input_impedance(const ReadoutNetwork& network, double omega_ghz);

// Impedance table from (frequency_ghz, re_ohm, im_ohm) rows, linearly interpolated.
class TabulatedImpedance {
public:
    explicit TabulatedImpedance(std::vector<std::array<double, 3>> rows);
    static TabulatedImpedance from_csv(const std::string& path);
    [[nodiscard]] std::complex<double> operator()(double omega_ghz) const;

private:
    std::vector<std::array<double, 3>> rows_;
};

struct T1Estimate {
    double omega10 = 0.0;            // GHz
    double re_zin = 0.0;             // ohms
    double matrix_element_sq = 0.0;  // |<0|2e q|1>|^2, C^2
    double t1 = 0.0;                 // microseconds; infinity when re_zin == 0
    bool unbounded = false;
};

// Golden rule: 1/T1 = 2 omega Re Z(omega) |<0|Q|1>|^2 / hbar, omega angular.
T1Estimate purcell_t1(const QubitSpectrum& spectrum, const std::function<std::complex<double>(double)>& z_of_ghz);
T1Estimate purcell_t1(const CircuitParams& params, const QubitSpectrum& spectrum, const ReadoutNetwork& network);

// C_q = e^2 / (2 h E_C), the capacitance implied by E_C in GHz.
double charging_capacitance(double e_c_ghz);

}  // namespace mist
