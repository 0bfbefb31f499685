#include "mist/purcell.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "mist/errors.hpp"

namespace mist {

using cd = std::complex<double>;

Element Element::tank(double l, double c, double q) {
    if (!(l > 0.0) || !(c > 0.0) || !(q > 0.0)) throw ValidationError("tank needs L, C, Q > 0");
    return parallel_lcr(l, c, q * std::sqrt(l / c));
}

void Element::validate() const {
    auto bad = [](const char* what) { throw ValidationError(std::string("degenerate network element: ") + what); };
    switch (kind) {
        case Kind::resistor:
            if (!(r >= 0.0) || !std::isfinite(r)) bad("resistance must be finite and >= 0");
            break;
        case Kind::inductor:
            if (!(l > 0.0) || !std::isfinite(l)) bad("inductance must be finite and > 0");
            break;
        case Kind::capacitor:
            if (!(c > 0.0) || !std::isfinite(c)) bad("capacitance must be finite and > 0");
            break;
        case Kind::parallel_lcr:
        case Kind::series_lcr:
            if (!(l > 0.0) || !(c > 0.0) || !(r >= 0.0) || !std::isfinite(l * c * r)) bad("lcr needs L, C > 0, R >= 0");
            if (kind == Kind::parallel_lcr && r == 0.0) bad("parallel lcr with R = 0 is a short");
            break;
    }
}

cd Element::impedance(double w) const {
    const cd j(0.0, 1.0);
    switch (kind) {
        case Kind::resistor:
            return r;
        case Kind::inductor:
            return j * w * l;
        case Kind::capacitor:
            return 1.0 / (j * w * c);
        case Kind::parallel_lcr:
            return 1.0 / (1.0 / r + 1.0 / (j * w * l) + j * w * c);
        case Kind::series_lcr:
            return r + j * w * l + 1.0 / (j * w * c);
    }
    throw InternalError("unknown element kind");
}

void ReadoutNetwork::validate() const {
    if (stages.empty()) throw ValidationError("readout network has no stages");
    for (const Stage& s : stages) s.element.validate();
}

ReadoutNetwork& ReadoutNetwork::series(const Element& e) {
    stages.push_back({Stage::Placement::series, e});
    return *this;
}

ReadoutNetwork& ReadoutNetwork::shunt(const Element& e) {
    stages.push_back({Stage::Placement::shunt, e});
    return *this;
}

cd input_impedance(const ReadoutNetwork& network, double omega_ghz) {
    if (!(omega_ghz > 0.0)) throw ValidationError("omega must be > 0");
    network.validate();
    const double w = two_pi * omega_ghz * 1e9;
    std::optional<cd> z;  // empty = open circuit
    for (auto it = network.stages.rbegin(); it != network.stages.rend(); ++it) {
        const cd ze = it->element.impedance(w);
        if (it->placement == Stage::Placement::series) {
            if (z) *z += ze;
        } else {
            z = z ? (*z * ze) / (*z + ze) : ze;
        }
    }
    if (!z) throw ValidationError("readout network is open at the qubit port");
    return *z;
}

TabulatedImpedance::TabulatedImpedance(std::vector<std::array<double, 3>> rows) : rows_(std::move(rows)) {
    if (rows_.size() < 2) throw ValidationError("impedance table needs at least two rows");
    std::sort(rows_.begin(), rows_.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
    for (std::size_t i = 1; i < rows_.size(); ++i)
        if (!(rows_[i][0] > rows_[i - 1][0])) throw ValidationError("impedance table has duplicate frequencies");
}

TabulatedImpedance TabulatedImpedance::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open impedance table " + path);
    std::vector<std::array<double, 3>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (char& ch : line)
            if (ch == ',') ch = ' ';
        std::istringstream ls(line);
        std::array<double, 3> r{};
        if (!(ls >> r[0] >> r[1] >> r[2])) {
            if (rows.empty()) continue;  // header
            throw ValidationError("malformed impedance row at line " + std::to_string(lineno));
        }
        rows.push_back(r);
    }
    return TabulatedImpedance(std::move(rows));
}

cd TabulatedImpedance::operator()(double f) const {
    if (f < rows_.front()[0] || f > rows_.back()[0]) throw RangeError("frequency outside the impedance table");
    auto hi = std::lower_bound(rows_.begin(), rows_.end(), f, [](const auto& r, double x) { return r[0] < x; });
    if (hi == rows_.begin()) return {(*hi)[1], (*hi)[2]};
    auto lo = hi - 1;
    const double s = (f - (*lo)[0]) / ((*hi)[0] - (*lo)[0]);
    return {(*lo)[1] + s * ((*hi)[1] - (*lo)[1]), (*lo)[2] + s * ((*hi)[2] - (*lo)[2])};
}

double charging_capacitance(double e_c_ghz) {
    if (!(e_c_ghz > 0.0)) throw ValidationError("e_c must be > 0");
    return Constants::e_charge * Constants::e_charge / (2.0 * Constants::h * e_c_ghz * 1e9);
}

T1Estimate purcell_t1(const QubitSpectrum& spectrum, const std::function<cd(double)>& z_of_ghz) {
    if (spectrum.n_levels < 2) throw ValidationError("T1 needs two qubit levels");
    if (!spectrum.converged) throw ValidationError("qubit spectrum is not converged");
    T1Estimate t;
    t.omega10 = spectrum.transition(1, 0);
    t.re_zin = z_of_ghz(t.omega10).real();
    const double q01 = std::abs(spectrum.charge_elements(0, 1));
    t.matrix_element_sq = std::pow(2.0 * Constants::e_charge * q01, 2);
    const double w = two_pi * t.omega10 * 1e9;
    const double rate = 2.0 * w * t.re_zin * t.matrix_element_sq / Constants::hbar;
    if (rate <= 0.0) {
        t.unbounded = true;
        t.t1 = std::numeric_limits<double>::infinity();
    } else {
        t.t1 = 1e6 / rate;
    }
    return t;
}

T1Estimate purcell_t1(const CircuitParams& params, const QubitSpectrum& spectrum, const ReadoutNetwork& network) {
    params.validate();
    // the junction sees its own shunt capacitance in parallel with the external network
    ReadoutNetwork full;
    full.shunt(Element::capacitor(charging_capacitance(params.e_c)));
    full.stages.insert(full.stages.end(), network.stages.begin(), network.stages.end());
    return purcell_t1(spectrum, [&](double f) { return input_impedance(full, f); });
}

}  // namespace mist
