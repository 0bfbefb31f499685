#include "mist/composite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mist/errors.hpp"

namespace mist {

Eigen::MatrixXd annihilation(int n) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

CompositeSpace build_composite(const CircuitParams& params, const QubitSpectrum& spectrum, int nq, int nr) {
    params.validate();
    if (!spectrum.converged) throw ValidationError("qubit spectrum is not converged");
    if (nq < 1 || nq > spectrum.n_levels)
        throw ValidationError("n_ist_levels must be in [1, spectrum.n_levels]");
    if (nr < 1) throw ValidationError("n_res_levels must be >= 1");

    CompositeSpace s;
    s.n_ist_levels = nq;
    s.n_res_levels = nr;
    s.omega_r = params.omega_r;
    s.coupling_prefactor = 2.0 * params.k_eff * std::sqrt(params.omega_r * params.e_c);
    s.qubit_energies = spectrum.energies.head(nq);

    const int dim = nq * nr;
    const Eigen::MatrixXd a = annihilation(nr);
    const Eigen::MatrixXd x = a + a.transpose();
    s.coupling_op = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 0; k < nq; ++k)
        for (int l = 0; l < nq; ++l) {
            const std::complex<double> g = spectrum.charge_elements(k, l);
            if (g == 0.0) continue;
            s.coupling_op.block(k * nr, l * nr, nr, nr) = g * x.cast<std::complex<double>>();
        }

    s.hamiltonian = s.coupling_prefactor * s.coupling_op;
    for (int k = 0; k < nq; ++k)
        for (int n = 0; n < nr; ++n) s.hamiltonian(k * nr + n, k * nr + n) += s.qubit_energies(k) + n * params.omega_r;

    const double herm = (s.hamiltonian - s.hamiltonian.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12 * std::max(1.0, s.hamiltonian.cwiseAbs().maxCoeff()))
        throw InternalError("composite Hamiltonian is not Hermitian");
    // exact symmetrization removes the last-ulp asymmetry from complex charge elements
    s.hamiltonian = 0.5 * (s.hamiltonian + s.hamiltonian.adjoint()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s.hamiltonian);
    if (es.info() != Eigen::Success) throw ConvergenceError("composite eigensolver failed");
    s.eigenvalues = es.eigenvalues();
    s.eigenvectors = es.eigenvectors();

    s.labels = dressed_labels(s);
    s.eigen_of_label.assign(static_cast<std::size_t>(dim), -1);
    for (int e = 0; e < dim; ++e) s.eigen_of_label[static_cast<std::size_t>(s.product_index(s.labels[e].k, s.labels[e].n))] = e;
    return s;
}

std::vector<DressedLabel> dressed_labels(const CompositeSpace& space) {
    const int dim = space.dim();
    const Eigen::MatrixXd ov = space.eigenvectors.cwiseAbs2();  // rows bare, cols eigen
    std::vector<int> order(static_cast<std::size_t>(dim) * dim);
    std::iota(order.begin(), order.end(), 0);
    // stable sort keeps the assignment independent of tie order
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return ov(i) > ov(j); });

    std::vector<DressedLabel> labels(static_cast<std::size_t>(dim));
    std::vector<char> bare_used(static_cast<std::size_t>(dim), 0);
    int assigned = 0;
    for (const int flat : order) {
        // column-major flat index
        const int bare = flat % dim;
        const int eig = flat / dim;
        if (labels[eig].k >= 0 || bare_used[bare]) continue;
        bare_used[bare] = 1;
        labels[eig].k = bare / space.n_res_levels;
        labels[eig].n = bare % space.n_res_levels;
        labels[eig].overlap = ov(bare, eig);
        // an even split counts as ambiguous despite rounding on either side of 1/2
        labels[eig].ambiguous = labels[eig].overlap < ambiguity_threshold + 1e-9;
        if (++assigned == dim) break;
    }
    return labels;
}

std::vector<StripLevel> rwa_strip_energies(const CompositeSpace& space, int n_total) {
    if (n_total < 0 || n_total > space.n_res_levels - 1) {
        std::ostringstream os;
        os << "strip " << n_total << " needs at least " << n_total + 1 << " resonator levels";
        throw RangeError(os.str());
    }
    std::vector<StripLevel> out;
    for (int k = 0; k < space.n_ist_levels && k <= n_total; ++k) {
        const int n = n_total - k;
        out.push_back({k, n, space.energy(k, n) - n * space.omega_r});
    }
    return out;
}

double dressed_resonator_frequency(const CompositeSpace& space, int k) {
    if (k < 0 || k >= space.n_ist_levels || space.n_res_levels < 2)
        throw RangeError("dressed resonator frequency needs the (k,0) and (k,1) states");
    if (space.label(k, 0).ambiguous || space.label(k, 1).ambiguous) {
        std::ostringstream os;
        os << "states (" << k << ",0)/(" << k << ",1) are ambiguously labeled; detune the qubit or enlarge the truncation";
        throw RangeError(os.str());
    }
    return space.energy(k, 1) - space.energy(k, 0);
}

ChiLamb numeric_chi_and_lamb(const CompositeSpace& space) {
    if (space.n_ist_levels < 2 || space.n_res_levels < 2) throw RangeError("chi needs two qubit and two resonator levels");
    for (int k = 0; k < 2; ++k)
        for (int n = 0; n < 2; ++n)
            if (space.label(k, n).ambiguous) throw RangeError("chi needs unambiguous (0/1, 0/1) labels");
    ChiLamb r;
    r.chi = 0.5 * ((space.energy(1, 1) - space.energy(1, 0)) - (space.energy(0, 1) - space.energy(0, 0)));
    r.lamb_shift = (space.energy(1, 0) - space.energy(0, 0)) - (space.qubit_energies(1) - space.qubit_energies(0));
    return r;
}

std::vector<StripCrossing> strip_crossings(const CompositeSpace& space, int a, int b, double max_jump) {
    if (a == b || a < 0 || b < 0 || a >= space.n_ist_levels || b >= space.n_ist_levels)
        throw RangeError("strip crossing needs two distinct retained qubit levels");
    const int lo = std::max(a, b);
    const int hi = space.n_res_levels - 1 + std::min(a, b);
    std::vector<StripCrossing> out;
    auto diff = [&](int nt) { return space.energy(a, nt - a) - space.energy(b, nt - b); };
    for (int nt = lo; nt < hi; ++nt) {
        const double d0 = diff(nt), d1 = diff(nt + 1);
        if ((d0 < 0.0) == (d1 < 0.0)) continue;
        if (std::abs(d1 - d0) > max_jump) continue;
        const double frac = std::abs(d0) / (std::abs(d0) + std::abs(d1));
        out.push_back({a, b, (nt - a) + frac, std::abs(d0) + std::abs(d1)});
    }
    return out;
}

}  // namespace mist
