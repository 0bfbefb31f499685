#include "mist/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "mist/errors.hpp"
#include "mist/kerr.hpp"

namespace mist {

void CircuitParams::validate() const {
    auto fail = [](const char* what) { throw ValidationError(std::string("invalid circuit parameters: ") + what); };
    if (!(e_c > 0.0)) fail("e_c must be > 0");
    if (!(e_l > 0.0)) fail("e_l must be > 0");
    if (!(e_j >= 0.0)) fail("e_j must be >= 0");
    if (!(omega_r > 0.0)) fail("omega_r must be > 0");
    if (!(k_eff >= 0.0 && k_eff < 1.0)) fail("k_eff must be in [0, 1)");
    if (!(kappa_r >= 0.0)) fail("kappa_r must be >= 0");
    if (!std::isfinite(phi_ext)) fail("phi_ext must be finite");
}

Eigen::MatrixXcd displacement_elements(double xi, int n) {
    // <m|e^{i s X}|n> = e^{-xi/2} sqrt(lo!/hi!) xi^{a/2} L_lo^{(a)}(xi) i^a,  a = |m - n|
    Eigen::MatrixXcd d(n, n);
    const double half_log_xi = 0.5 * std::log(xi);
    std::vector<double> lag(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        const int len = n - a;
        lag[0] = 1.0;
        if (len > 1) lag[1] = 1.0 + a - xi;
        for (int k = 1; k + 1 < len; ++k)
            lag[k + 1] = ((2.0 * k + 1.0 + a - xi) * lag[k] - (k + a) * lag[k - 1]) / (k + 1.0);
        const std::complex<double> phase = std::array<std::complex<double>, 4>{
            {{1, 0}, {0, 1}, {-1, 0}, {0, -1}}}[a % 4];
        for (int lo = 0; lo < len; ++lo) {
            const int hi = lo + a;
            const double mag =
                std::exp(-0.5 * xi + 0.5 * (std::lgamma(lo + 1.0) - std::lgamma(hi + 1.0)) + a * half_log_xi);
            const std::complex<double> v = mag * lag[lo] * phase;
            d(lo, hi) = v;
            d(hi, lo) = v;
        }
    }
    return d;
}

namespace {

// Fallback basis centre: deepest minimum of the potential, harmonic width there.
Displacement local_minimum_basis(const CircuitParams& p) {
    auto u = [&](double x) { return -p.e_j * std::cos(x - p.phi_ext) + 0.5 * p.e_l * x * x; };
    double best = 0.0;
    double best_u = u(0.0);
    constexpr int n = 4001;
    const double span = 2.0 * std::numbers::pi + std::abs(p.phi_ext);
    for (int i = 0; i < n; ++i) {
        const double x = -span + 2.0 * span * i / (n - 1);
        if (u(x) < best_u) {
            best_u = u(x);
            best = x;
        }
    }
    // Newton polish on u'(x) = e_j sin(x - phi) + e_l x
    for (int it = 0; it < 50; ++it) {
        const double g = p.e_j * std::sin(best - p.phi_ext) + p.e_l * best;
        const double c = p.e_j * std::cos(best - p.phi_ext) + p.e_l;
        if (c <= 0.0) break;
        best -= g / c;
        if (std::abs(g) < 1e-15) break;
    }
    double curv = p.e_j * std::cos(best - p.phi_ext) + p.e_l;
    if (curv <= 0.0) curv = p.e_l;
    return {std::sqrt(2.0 * p.e_c / curv), best};
}

}  // namespace

IstHamiltonian build_ist_hamiltonian(const CircuitParams& params, int basis_size, double xi, double phi_star) {
    params.validate();
    if (basis_size < 2) throw ValidationError("basis_size must be >= 2");
    if (!(xi > 0.0)) throw ValidationError("xi must be > 0");
    const int n = basis_size;

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) b(k - 1, k) = std::sqrt(static_cast<double>(k));
    const Eigen::MatrixXd bd = b.transpose();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) num(k, k) = k;

    // X^2 and -(b - b^dag)^2 built from their normal-ordered forms, so the last row stays exact.
    const Eigen::MatrixXd bb = b * b;
    const Eigen::MatrixXd bdbd = bd * bd;
    const Eigen::MatrixXd x = b + bd;
    const Eigen::MatrixXd x2 = bb + bdbd + 2.0 * num + id;
    const Eigen::MatrixXd p2 = -(bb + bdbd) + 2.0 * num + id;

    const Eigen::MatrixXcd d = displacement_elements(xi, n);
    const double pe = params.phi_ext - phi_star;
    // cos(sqrt(xi) X - pe) = cos(pe) cos(sqrt(xi) X) + sin(pe) sin(sqrt(xi) X)
    const Eigen::MatrixXd cos_op = std::cos(pe) * d.real() + std::sin(pe) * d.imag();

    IstHamiltonian out;
    out.xi = xi;
    out.phi_star = phi_star;
    out.h = (params.e_c / xi) * p2 - params.e_j * cos_op +
            0.5 * params.e_l * (phi_star * phi_star * id + 2.0 * phi_star * std::sqrt(xi) * x + xi * x2);
    // q = -i/(2 sqrt(xi)) (b - b^dag) = i (b^dag - b) / (2 sqrt(xi))
    out.charge = (bd - b) / (2.0 * std::sqrt(xi));

    const double asym = (out.h - out.h.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, out.h.cwiseAbs().maxCoeff()))
        throw InternalError("IST Hamiltonian is not Hermitian");
    return out;
}

IstHamiltonian build_ist_hamiltonian(const CircuitParams& params, int basis_size) {
    params.validate();
    try {
        const Displacement s = solve_displacement_impedance(params);
        return build_ist_hamiltonian(params, basis_size, s.xi, s.phi_star);
    } catch (const RegimeError&) {
        const Displacement s = local_minimum_basis(params);
        IstHamiltonian out = build_ist_hamiltonian(params, basis_size, s.xi, s.phi_star);
        out.kerr_basis = false;
        return out;
    }
}

int default_basis_size(int n_levels) { return std::max(60, 2 * n_levels + 24); }

namespace {

struct Solved {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    IstHamiltonian ham;
};

Solved solve(const CircuitParams& params, int basis_size) {
    Solved s{{}, {}, build_ist_hamiltonian(params, basis_size)};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.ham.h);
    if (es.info() != Eigen::Success) throw ConvergenceError("IST eigensolver failed");
    s.values = es.eigenvalues();
    s.vectors = es.eigenvectors();
    return s;
}

}  // namespace

QubitSpectrum diagonalize_ist(const CircuitParams& params, int n_levels, int basis_size, bool check_convergence) {
    if (n_levels < 1) throw ValidationError("n_levels must be >= 1");
    if (basis_size <= 0) basis_size = default_basis_size(n_levels);
    if (2 * n_levels > basis_size) {
        std::ostringstream os;
        os << "n_levels " << n_levels << " exceeds basis_size/2 for basis " << basis_size;
        throw ValidationError(os.str());
    }
    const Solved s = solve(params, basis_size);

    QubitSpectrum out;
    out.phi_ext = params.phi_ext;
    out.n_levels = n_levels;
    out.basis_size = basis_size;
    out.ground_energy = s.values(0);
    out.energies = s.values.head(n_levels).array() - s.values(0);
    const Eigen::MatrixXd v = s.vectors.leftCols(n_levels);
    const Eigen::MatrixXd g = v.transpose() * s.ham.charge * v;
    out.charge_elements = std::complex<double>(0.0, 1.0) * g.cast<std::complex<double>>();

    if (check_convergence) {
        const Solved big = solve(params, basis_size + 8);
        double shift = 0.0;
        for (int k = 0; k < n_levels; ++k) {
            const double e_small = s.values(k) - s.values(0);
            const double e_big = big.values(k) - big.values(0);
            shift = std::max(shift, std::abs(e_small - e_big));
        }
        // absolute ground shift matters for composite use too
        shift = std::max(shift, std::abs(big.values(0) - s.values(0)));
        out.max_shift = shift;
        out.converged = shift < convergence_tolerance_ghz;
    } else {
        out.converged = true;
    }
    return out;
}

double omega10(const CircuitParams& params, int basis_size) {
    const Solved s = solve(params, basis_size);
    return s.values(1) - s.values(0);
}

double flux_for_frequency(const CircuitParams& params, double target, FluxBranch branch) {
    params.validate();
    constexpr int samples = 65;
    const double pi = std::numbers::pi;
    std::vector<double> phi(samples), w(samples);
    for (int i = 0; i < samples; ++i) {
        phi[i] = pi * i / (samples - 1);
        w[i] = omega10(params.at_flux(phi[i]));
    }
    const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
    if (target < *mn - 1e-9 || target > *mx + 1e-9) {
        std::ostringstream os;
        os << "target omega10 " << target << " GHz outside tuning range [" << *mn << ", " << *mx << "]";
        throw RangeError(os.str());
    }

    // Split [0, pi] into monotone runs; upper-side searches from 0, lower-side from pi.
    std::vector<std::pair<int, int>> runs;
    int start = 0;
    for (int i = 1; i + 1 < samples; ++i) {
        const double d1 = w[i] - w[i - 1];
        const double d2 = w[i + 1] - w[i];
        if (d1 * d2 < 0.0) {
            runs.emplace_back(start, i);
            start = i;
        }
    }
    runs.emplace_back(start, samples - 1);
    if (branch == FluxBranch::lower_side) std::reverse(runs.begin(), runs.end());

    // Kerr seed picks the preferred bracket when it falls inside one.
    double seed = -1.0;
    try {
        double lo = 0.0, hi = pi;
        auto f = [&](double x) { return kerr_params(params.at_flux(x)).omega_q - target; };
        double flo = f(lo), fhi = f(hi);
        if (flo * fhi < 0.0) {
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = f(mid);
                if (flo * fm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            seed = 0.5 * (lo + hi);
        }
    } catch (const Error&) {
        seed = -1.0;
    }

    for (const auto& [a, b] : runs) {
        const double wa = w[a], wb = w[b];
        if ((target - wa) * (target - wb) > 0.0) continue;
        if (target == wa) return phi[a];
        if (target == wb) return phi[b];
        double lo = phi[a], hi = phi[b];
        if (seed > lo && seed < hi) {
            // shrink to a small bracket around the seed if it still brackets
            const double d = 0.02;
            const double l2 = std::max(lo, seed - d), h2 = std::min(hi, seed + d);
            const double fl = omega10(params.at_flux(l2)) - target;
            const double fh = omega10(params.at_flux(h2)) - target;
            if (fl * fh <= 0.0) {
                lo = l2;
                hi = h2;
            }
        }
        double flo = omega10(params.at_flux(lo)) - target;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = omega10(params.at_flux(mid)) - target;
            if (std::abs(fm) < 1e-7 || hi - lo < 1e-13) return mid;
            if (flo * fm <= 0.0) {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        return 0.5 * (lo + hi);
    }
    throw RangeError("target omega10 not reachable on the requested branch");
}

}  // namespace mist
