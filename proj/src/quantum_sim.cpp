#include "mist/quantum_sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "mist/errors.hpp"

namespace mist {

using cd = std::complex<double>;

void DriveProtocol::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("drive amplitude must be >= 0");
    if (!(omega_d > 0.0)) throw ValidationError("drive frequency must be > 0");
    if (!(t_on >= 0.0) || !(t_off >= 0.0)) throw ValidationError("pulse durations must be >= 0");
}

double decay_time(double kappa_r) {
    if (!(kappa_r > 0.0)) throw ValidationError("kappa_r must be > 0");
    return 1.0 / (two_pi * kappa_r);
}

DriveProtocol square_protocol(double epsilon, double omega_d, double kappa_r, double on_mult, double off_mult) {
    const double tau = decay_time(kappa_r);
    DriveProtocol p{epsilon, omega_d, on_mult * tau, off_mult * tau};
    p.validate();
    return p;
}

double amplitude_for_photons(double n_bar, double kappa_r) {
    if (!(n_bar >= 0.0)) throw ValidationError("n_bar must be >= 0");
    if (!(kappa_r > 0.0)) throw ValidationError("kappa_r must be > 0");
    return 0.5 * kappa_r * std::sqrt(n_bar);
}

Truncation truncation_plan(double n_bar, int init_state) {
    if (!(n_bar >= 0.0)) throw ValidationError("n_bar must be >= 0");
    if (init_state != 0 && init_state != 1) throw ValidationError("init_state must be 0 or 1");
    Truncation t;
    t.n_res_levels = static_cast<int>(std::ceil(n_bar + 3.0 * std::sqrt(n_bar) - 1e-12)) + 2;
    t.n_ist_levels = init_state == 0 ? 18 : 24;
    return t;
}

DressedOperators dressed_operators(const CompositeSpace& space) {
    const int nq = space.n_ist_levels, nr = space.n_res_levels, dim = space.dim();
    Eigen::MatrixXcd a_full = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd n_full = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 0; k < nq; ++k)
        for (int n = 0; n < nr; ++n) {
            n_full(k * nr + n, k * nr + n) = n;
            if (n > 0) a_full(k * nr + n - 1, k * nr + n) = std::sqrt(static_cast<double>(n));
        }
    const Eigen::MatrixXcd& v = space.eigenvectors;
    DressedOperators ops;
    ops.energies = space.eigenvalues;
    ops.a = v.adjoint() * a_full * v;
    ops.number = v.adjoint() * n_full * v;
    ops.lowering = Eigen::MatrixXcd::Zero(dim, dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i)
            if (ops.energies(i) < ops.energies(j)) ops.lowering(i, j) = ops.a(i, j);
    ops.qubit_label.resize(static_cast<std::size_t>(dim));
    for (int e = 0; e < dim; ++e) ops.qubit_label[static_cast<std::size_t>(e)] = space.labels[e].k;
    return ops;
}

namespace {

// entrywise l1 and sqrt(D) ||E||_F both bound the trace norm of a D x D matrix
double trace_norm_bound(const Eigen::MatrixXcd& m) {
    return std::min(m.cwiseAbs().sum(), std::sqrt(static_cast<double>(m.rows())) * m.norm());
}

Eigen::VectorXd label_populations(const Eigen::MatrixXcd& rho, const std::vector<int>& labels, int nq) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(nq);
    for (int i = 0; i < rho.rows(); ++i) p(labels[static_cast<std::size_t>(i)]) += rho(i, i).real();
    return p;
}

// Interaction picture with respect to the dressed undriven Hamiltonian:
// O_I(t)_ij = O_ij exp(2 pi i (E_i - E_j) t).
class MasterEquation {
public:
    MasterEquation(const DressedOperators& ops, double omega_d, double kappa_r)
        : ops_(ops), omega_d_(omega_d), kappa_(two_pi * kappa_r), a_dag_a_(ops.lowering.adjoint() * ops.lowering) {}

    void set_epsilon(double eps) { eps_ = eps; }

    Eigen::MatrixXcd phases(double t) const {
        const Eigen::VectorXcd p = (cd(0.0, two_pi * t) * ops_.energies.cast<cd>()).array().exp();
        return p * p.adjoint();
    }

    Eigen::MatrixXcd operator()(double t, const Eigen::MatrixXcd& rho) const {
        const Eigen::MatrixXcd ph = phases(t);
        Eigen::MatrixXcd k = cd(0.0, -0.5 * kappa_) * a_dag_a_.cwiseProduct(ph);
        if (eps_ != 0.0) {
            const cd carrier = std::polar(two_pi * eps_, two_pi * omega_d_ * t);
            const Eigen::MatrixXcd ai = ops_.a.cwiseProduct(ph);
            k += carrier * ai + std::conj(carrier) * ai.adjoint();
        }
        const Eigen::MatrixXcd li = ops_.lowering.cwiseProduct(ph);
        Eigen::MatrixXcd m = cd(0.0, -1.0) * (k * rho);
        Eigen::MatrixXcd out = m + m.adjoint();
        const Eigen::MatrixXcd lr = kappa_ * (li * rho);
        // the jump term is Hermitian: form the lower triangle and mirror it
        out.triangularView<Eigen::Lower>() += lr * li.adjoint();
        for (int j = 1; j < out.cols(); ++j)
            for (int i = 0; i < j; ++i) out(i, j) = std::conj(out(j, i));
        return out;
    }

    double photons(double t, const Eigen::MatrixXcd& rho) const {
        // Tr(N_I rho_I)
        return ops_.number.cwiseProduct(phases(t)).cwiseProduct(rho.transpose()).sum().real();
    }

    double photon_rate(double t, const Eigen::MatrixXcd& rho) const {
        const Eigen::MatrixXcd ph = phases(t);
        const Eigen::MatrixXcd ni = ops_.number.cwiseProduct(ph);
        const Eigen::MatrixXcd drho = (*this)(t, rho);
        Eigen::MatrixXcd ndot(ni.rows(), ni.cols());
        for (int j = 0; j < ni.cols(); ++j)
            for (int i = 0; i < ni.rows(); ++i)
                ndot(i, j) = cd(0.0, two_pi * (ops_.energies(i) - ops_.energies(j))) * ni(i, j);
        return (ni.cwiseProduct(drho.transpose()).sum() + ndot.cwiseProduct(rho.transpose()).sum()).real();
    }

private:
    const DressedOperators& ops_;
    double omega_d_;
    double kappa_;
    double eps_ = 0.0;
    Eigen::MatrixXcd a_dag_a_;
};

}  // namespace

Trajectory evolve_lindblad(const CompositeSpace& space, const DriveProtocol& protocol, double kappa_r, int init_k,
                           const LindbladOptions& options) {
    protocol.validate();
    if (!(kappa_r >= 0.0)) throw ValidationError("kappa_r must be >= 0");
    if (init_k < 0 || init_k >= space.n_ist_levels) throw ValidationError("initial qubit state outside truncation");
    if (options.n_samples < 1) throw ValidationError("n_samples must be >= 1");

    const DressedOperators ops = dressed_operators(space);
    MasterEquation eq(ops, protocol.omega_d, kappa_r);
    const int dim = space.dim();
    const int nq = space.n_ist_levels;

    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    const int i0 = space.eigen_index(init_k, 0);
    rho(i0, i0) = 1.0;

    std::vector<double> times;
    const double total = protocol.duration();
    for (int j = 0; j <= options.n_samples; ++j) times.push_back(total * j / options.n_samples);
    bool has_on = false;
    for (const double t : times) has_on = has_on || std::abs(t - protocol.t_on) < 1e-12 * std::max(1.0, total);
    if (!has_on) {
        times.push_back(protocol.t_on);
        std::sort(times.begin(), times.end());
    }

    Trajectory traj;
    auto record = [&](double t) {
        TrajectorySample s;
        s.t = t;
        s.photons = eq.photons(t, rho);
        s.trace = rho.trace().real();
        s.populations = label_populations(rho, ops.qubit_label, nq);
        traj.samples.push_back(std::move(s));
    };
    auto post = [&](double t, Eigen::MatrixXcd& r) {
        traj.max_hermiticity_defect = std::max(traj.max_hermiticity_defect, (r - r.adjoint()).cwiseAbs().maxCoeff());
        r = (0.5 * (r + r.adjoint())).eval();
        const double drift = std::abs(r.trace().real() - 1.0);
        traj.max_trace_drift = std::max(traj.max_trace_drift, drift);
        if (drift > options.trace_tolerance) {
            std::ostringstream os;
            os << "trace drift " << drift << " exceeds " << options.trace_tolerance << " at t = " << t << " ns";
            throw IntegratorError(os.str());
        }
    };

    OdeOptions oo;
    oo.atol = options.atol;
    Dopri5<Eigen::MatrixXcd> solver(oo);
    record(0.0);
    for (std::size_t j = 1; j < times.size(); ++j) {
        const double ta = times[j - 1], tb = times[j];
        if (tb <= ta) continue;
        // drive is constant on each interval since t_on is a sample boundary
        eq.set_epsilon(protocol.epsilon_at(0.5 * (ta + tb)));
        solver.integrate(eq, ta, tb, rho, trace_norm_bound, post);
        record(tb);
        if (std::abs(tb - protocol.t_on) < 1e-12 * std::max(1.0, total)) {
            traj.n_bar_end_on = eq.photons(tb, rho);
            eq.set_epsilon(protocol.epsilon);
            traj.dn_dt_end_on = eq.photon_rate(tb, rho);
        }
    }
    if (protocol.t_on == 0.0) traj.n_bar_end_on = 0.0;

    traj.min_diagonal = rho.diagonal().real().minCoeff();
    const Eigen::MatrixXcd ph = eq.phases(total);
    traj.rho_dressed = rho.cwiseProduct(ph.conjugate());
    traj.stats = solver.stats();
    return traj;
}

Eigen::VectorXd bare_qubit_populations(const CompositeSpace& space, const Eigen::MatrixXcd& rho_dressed) {
    const Eigen::MatrixXcd& v = space.eigenvectors;
    const Eigen::VectorXd diag = ((v * rho_dressed).cwiseProduct(v.conjugate())).rowwise().sum().real();
    Eigen::VectorXd p = Eigen::VectorXd::Zero(space.n_ist_levels);
    for (int k = 0; k < space.n_ist_levels; ++k) p(k) = diag.segment(k * space.n_res_levels, space.n_res_levels).sum();
    return p;
}

MistResult mist_quantum(const CircuitParams& params, double n_bar, int init_state, const QuantumOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    params.validate();
    const double kappa = options.kappa_r.value_or(params.kappa_r);
    if (!(kappa > 0.0)) throw ValidationError("kappa_r must be > 0 for a MIST run");
    Truncation tr = truncation_plan(n_bar, init_state);
    if (options.n_ist_levels) tr.n_ist_levels = *options.n_ist_levels;
    if (options.n_res_levels) tr.n_res_levels = *options.n_res_levels;
    if (tr.n_ist_levels <= init_state || tr.n_res_levels < 2) throw ValidationError("truncation too small");

    const QubitSpectrum spec = diagonalize_ist(params, tr.n_ist_levels);
    if (!spec.converged) {
        std::ostringstream os;
        os << "IST spectrum not converged (max shift " << spec.max_shift * 1e6 << " kHz)";
        throw ConvergenceError(os.str());
    }
    const CompositeSpace space = build_composite(params, spec, tr.n_ist_levels, tr.n_res_levels);
    const double omega_d = dressed_resonator_frequency(space, init_state);
    const DriveProtocol protocol =
        square_protocol(amplitude_for_photons(n_bar, kappa), omega_d, kappa, options.on_mult, options.off_mult);
    const Trajectory traj = evolve_lindblad(space, protocol, kappa, init_state, options.lindblad);

    MistResult r;
    r.backend = "quantum";
    r.init_label = init_state;
    r.n_bar = n_bar;
    r.phi_ext = params.phi_ext;
    r.omega_d = omega_d;
    r.populations = traj.samples.back().populations;
    r.bare_populations = bare_qubit_populations(space, traj.rho_dressed);
    for (int k = 0; k < r.populations.size(); ++k)
        if (r.populations(k) < -1e-9 || r.populations(k) > 1.0 + 1e-9)
            throw IntegratorError("population outside [0, 1] beyond numerical noise");
    r.leakage = std::clamp(1.0 - r.populations(init_state), 0.0, 1.0);
    r.n_bar_achieved = std::max(0.0, traj.n_bar_end_on);
    r.steady_state_reached = std::abs(traj.dn_dt_end_on) <= 0.01 * n_bar * two_pi * kappa;
    r.n_ist_levels = tr.n_ist_levels;
    r.n_res_levels = tr.n_res_levels;
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string to_json(const MistResult& r) {
    nlohmann::ordered_json j;
    j["version"] = MIST_VERSION;
    j["backend"] = r.backend;
    j["init"] = r.init_label;
    j["n_bar"] = r.n_bar;
    j["phi_ext"] = r.phi_ext;
    j["omega_d_ghz"] = r.omega_d;
    j["leakage"] = r.leakage;
    j["populations"] = std::vector<double>(r.populations.data(), r.populations.data() + r.populations.size());
    j["bare_populations"] =
        std::vector<double>(r.bare_populations.data(), r.bare_populations.data() + r.bare_populations.size());
    j["population_basis"] = "dressed";
    j["n_bar_achieved"] = r.n_bar_achieved;
    j["steady_state_reached"] = r.steady_state_reached;
    j["truncation"] = {{"n_ist", r.n_ist_levels}, {"n_res", r.n_res_levels}};
    j["runtime_s"] = r.runtime_s;
    return j.dump(2);
}

}  // namespace mist
