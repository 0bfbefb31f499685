#include "mist/semiclassical.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mist/composite.hpp"
#include "mist/errors.hpp"

namespace mist {

using cd = std::complex<double>;

std::complex<double> alpha_at(const DriveProtocol& protocol, double kappa_r, double t) {
    const double k = two_pi * kappa_r;
    const cd a_ss = cd(0.0, -2.0 * protocol.epsilon / kappa_r);
    if (t <= protocol.t_on) return a_ss * (1.0 - std::exp(-0.5 * k * t));
    const cd a_on = a_ss * (1.0 - std::exp(-0.5 * k * protocol.t_on));
    return a_on * std::exp(-0.5 * k * (t - protocol.t_on));
}

CoherentTrajectory solve_alpha(const DriveProtocol& protocol, double kappa_r, const std::vector<double>& times) {
    protocol.validate();
    if (!(kappa_r > 0.0)) throw ValidationError("kappa_r must be > 0");
    CoherentTrajectory out;
    out.kappa_r = kappa_r;
    out.times = times;
    for (const double t : times) {
        out.alpha.push_back(alpha_at(protocol, kappa_r, t));
        out.epsilon_profile.push_back(protocol.epsilon_at(t));
    }
    return out;
}

double semiclassical_coupling(const CircuitParams& params) {
    return 2.0 * params.k_eff * std::sqrt(params.omega_r * params.e_c);
}

namespace {

void check_levels(const QubitSpectrum& spectrum, int m) {
    if (m < 1 || m > spectrum.n_levels) {
        std::ostringstream os;
        os << "M = " << m << " needs at least that many qubit levels (have " << spectrum.n_levels << ")";
        throw ValidationError(os.str());
    }
}

}  // namespace

Eigen::MatrixXcd interaction_amplitude(const QubitSpectrum& spectrum, const CircuitParams& params, double alpha_abs,
                                       int m, SemiclassicalModel model) {
    check_levels(spectrum, m);
    const double pref = semiclassical_coupling(params);
    const Eigen::MatrixXcd g = spectrum.charge_elements.topLeftCorner(m, m);
    if (model == SemiclassicalModel::simple) return (pref * 2.0 * alpha_abs) * g;

    // 2 pref Re sqrt(|alpha|^2 - k) g_{k,k+l} |k><k+l| + h.c.
    const double n2 = alpha_abs * alpha_abs;
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        const double f = n2 > k ? std::sqrt(n2 - k) : 0.0;
        if (f == 0.0) continue;
        for (int j = k + 1; j < m; ++j) u(k, j) = f * g(k, j);
    }
    return (2.0 * pref) * (u + u.adjoint());
}

Eigen::MatrixXcd simple_interaction_hamiltonian(const QubitSpectrum& spectrum, const CircuitParams& params,
                                                double alpha_abs, double t, double omega_d, int m) {
    return std::cos(two_pi * omega_d * t) *
           interaction_amplitude(spectrum, params, alpha_abs, m, SemiclassicalModel::simple);
}

Eigen::MatrixXcd renormalized_interaction_hamiltonian(const QubitSpectrum& spectrum, const CircuitParams& params,
                                                      double alpha_abs, double t, double omega_d, int m) {
    return std::cos(two_pi * omega_d * t) *
           interaction_amplitude(spectrum, params, alpha_abs, m, SemiclassicalModel::renormalized);
}

namespace {

Eigen::MatrixXcd phase_matrix(const Eigen::VectorXd& e, double t) {
    const Eigen::VectorXcd p = (cd(0.0, two_pi * t) * e.cast<cd>()).array().exp();
    return p * p.adjoint();
}

}  // namespace

MistResult mist_semiclassical(const CircuitParams& params, double n_bar, int init_state, SemiclassicalModel model,
                              const SemiclassicalOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    params.validate();
    const double kappa = options.kappa_r.value_or(params.kappa_r);
    if (!(kappa > 0.0)) throw ValidationError("kappa_r must be > 0 for a MIST run");
    const int m = options.m;
    if (init_state < 0 || init_state >= m) throw ValidationError("initial state outside the retained levels");

    const QubitSpectrum spec = diagonalize_ist(params, m);
    if (!spec.converged) throw ConvergenceError("IST spectrum not converged for the semiclassical model");
    double omega_d = 0.0;
    if (options.omega_d) {
        omega_d = *options.omega_d;
    } else {
        const int nr = options.n_res_for_dressing > 0 ? options.n_res_for_dressing : 4;
        omega_d = dressed_resonator_frequency(build_composite(params, spec, m, nr), init_state);
    }
    const DriveProtocol protocol =
        square_protocol(amplitude_for_photons(n_bar, kappa), omega_d, kappa, options.on_mult, options.off_mult);
    const Eigen::VectorXd e = spec.energies.head(m);
    const Eigen::MatrixXcd g_unit = interaction_amplitude(spec, params, 1.0, m, SemiclassicalModel::simple);

    auto rhs = [&](double t, const Eigen::VectorXcd& psi) -> Eigen::VectorXcd {
        const double a = std::abs(alpha_at(protocol, kappa, t));
        const double c = std::cos(two_pi * omega_d * t);
        if (a == 0.0 || c == 0.0) return Eigen::VectorXcd::Zero(psi.size());
        Eigen::MatrixXcd h = model == SemiclassicalModel::simple ? (a * g_unit).eval()
                                                                 : interaction_amplitude(spec, params, a, m, model);
        h = h.cwiseProduct(phase_matrix(e, t));
        return cd(0.0, -two_pi * c) * (h * psi);
    };
    auto l2 = [](const Eigen::VectorXcd& v) { return v.norm(); };

    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(m);
    psi(init_state) = 1.0;
    OdeOptions oo;
    oo.atol = options.atol;
    // resolve the carrier
    oo.max_step = 0.25 / omega_d;
    Dopri5<Eigen::VectorXcd> solver(oo);
    double drift = 0.0;
    auto post = [&](double, Eigen::VectorXcd& y) { drift = std::max(drift, std::abs(y.norm() - 1.0)); };
    solver.integrate(rhs, 0.0, protocol.t_on, psi, l2, post);
    solver.integrate(rhs, protocol.t_on, protocol.duration(), psi, l2, post);
    if (drift > 1e-6) {
        std::ostringstream os;
        os << "state norm drifted by " << drift;
        throw IntegratorError(os.str());
    }

    MistResult r;
    r.backend = model == SemiclassicalModel::simple ? "semiclassical-simple" : "semiclassical-renormalized";
    r.init_label = init_state;
    r.n_bar = n_bar;
    r.phi_ext = params.phi_ext;
    r.omega_d = omega_d;
    r.populations = psi.cwiseAbs2();
    r.bare_populations = r.populations;
    r.leakage = std::clamp(1.0 - r.populations(init_state), 0.0, 1.0);
    r.n_bar_achieved = std::norm(alpha_at(protocol, kappa, protocol.t_on));
    r.n_ist_levels = m;
    r.n_res_levels = 0;
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

Eigen::MatrixXcd period_propagator(const Eigen::VectorXd& energies, const Eigen::MatrixXcd& coupling, double omega_d,
                                   double atol) {
    if (!(omega_d > 0.0)) throw ValidationError("drive frequency must be > 0");
    const int m = static_cast<int>(energies.size());
    const double period = 1.0 / omega_d;
    auto rhs = [&](double t, const Eigen::MatrixXcd& u) -> Eigen::MatrixXcd {
        const Eigen::MatrixXcd h = coupling.cwiseProduct(phase_matrix(energies, t));
        return cd(0.0, -two_pi * std::cos(two_pi * omega_d * t)) * (h * u);
    };
    auto fro = [](const Eigen::MatrixXcd& x) { return x.norm(); };
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(m, m);
    OdeOptions oo;
    oo.atol = atol;
    oo.max_step = period / 16.0;
    Dopri5<Eigen::MatrixXcd> solver(oo);
    solver.integrate(rhs, 0.0, period, u, fro);
    // back to the lab frame
    const Eigen::VectorXcd p = (cd(0.0, -two_pi * period) * energies.cast<cd>()).array().exp();
    return p.asDiagonal() * u;
}

namespace {

double fold(double q, double w) {
    double x = std::remainder(q, w);
    if (x <= -0.5 * w) x += w;
    return x;
}

// Greedy bijective assignment maximizing weights w(row, col); returns col for each row.
std::vector<int> greedy_assign(const Eigen::MatrixXd& w) {
    const int n = static_cast<int>(w.rows());
    std::vector<int> order(static_cast<std::size_t>(n) * n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return w(i) > w(j); });
    std::vector<int> out(static_cast<std::size_t>(n), -1);
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    int done = 0;
    for (const int f : order) {
        const int r = f % n, c = f / n;
        if (out[r] >= 0 || used[c]) continue;
        out[r] = c;
        used[c] = 1;
        if (++done == n) break;
    }
    return out;
}

}  // namespace

FloquetSpectrum floquet_quasienergies(const QubitSpectrum& spectrum, const CircuitParams& params,
                                      const std::vector<double>& photon_grid, int m, SemiclassicalModel model,
                                      double omega_d, const FloquetOptions& options) {
    check_levels(spectrum, m);
    if (photon_grid.empty()) throw ValidationError("photon grid is empty");
    for (std::size_t i = 1; i < photon_grid.size(); ++i)
        if (!(photon_grid[i] > photon_grid[i - 1])) throw ValidationError("photon grid must be strictly increasing");
    if (photon_grid.front() < 0.0) throw ValidationError("photon numbers must be >= 0");

    FloquetSpectrum out;
    out.photon_grid = photon_grid;
    out.omega_d = omega_d;
    const Eigen::VectorXd e = spectrum.energies.head(m);
    Eigen::MatrixXcd prev_vectors;
    std::vector<int> prev_branch_label;

    for (const double n2 : photon_grid) {
        const Eigen::MatrixXcd c = interaction_amplitude(spectrum, params, std::sqrt(n2), m, model);
        const Eigen::MatrixXcd u = period_propagator(e, c, omega_d, options.atol);
        const double defect = (u.adjoint() * u - Eigen::MatrixXcd::Identity(m, m)).norm();
        out.max_unitarity_defect = std::max(out.max_unitarity_defect, defect);
        if (defect > options.unitarity_tolerance) {
            std::ostringstream os;
            os << "Floquet propagator unitarity defect " << defect << " at |alpha|^2 = " << n2;
            throw IntegratorError(os.str());
        }
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u);
        if (es.info() != Eigen::Success) throw ConvergenceError("Floquet eigensolver failed");
        Eigen::MatrixXcd vecs = es.eigenvectors();
        for (int j = 0; j < m; ++j) vecs.col(j).normalize();
        std::vector<double> q(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) q[j] = fold(-std::arg(es.eigenvalues()(j)) * omega_d / two_pi, omega_d);

        // rows: bare level, cols: mode
        const std::vector<int> bare_mode = greedy_assign(vecs.cwiseAbs2());
        std::vector<double> diab(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) diab[k] = q[bare_mode[k]];
        out.diabatic.push_back(diab);

        std::vector<int> branch_mode;
        if (prev_vectors.size() == 0) {
            branch_mode = bare_mode;
            prev_branch_label.resize(static_cast<std::size_t>(m));
            std::iota(prev_branch_label.begin(), prev_branch_label.end(), 0);
        } else {
            // rows: previous branch, cols: new mode
            branch_mode = greedy_assign((prev_vectors.adjoint() * vecs).cwiseAbs2());
        }
        std::vector<double> qb(static_cast<std::size_t>(m));
        Eigen::MatrixXcd ordered(m, m);
        for (int b = 0; b < m; ++b) {
            qb[b] = q[branch_mode[b]];
            ordered.col(b) = vecs.col(branch_mode[b]);
        }
        out.quasienergies.push_back(qb);
        out.branch_labels.push_back(prev_branch_label);
        prev_vectors = ordered;
    }

    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b)
            for (std::size_t j = 0; j + 1 < photon_grid.size(); ++j) {
                const double d0 = std::remainder(out.diabatic[j][a] - out.diabatic[j][b], omega_d);
                const double d1 = std::remainder(out.diabatic[j + 1][a] - out.diabatic[j + 1][b], omega_d);
                if ((d0 < 0.0) == (d1 < 0.0)) continue;
                if (std::abs(d1 - d0) > options.max_jump) continue;
                const double frac = std::abs(d0) / (std::abs(d0) + std::abs(d1));
                const double n = photon_grid[j] + frac * (photon_grid[j + 1] - photon_grid[j]);
                out.crossings.push_back({a, b, n, std::abs(d0) + std::abs(d1)});
            }
    std::stable_sort(out.crossings.begin(), out.crossings.end(),
                     [](const FloquetCrossing& x, const FloquetCrossing& y) { return x.photons < y.photons; });
    return out;
}

}  // namespace mist
