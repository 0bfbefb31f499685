#include "mist/fitting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mist/circuit.hpp"
#include "mist/composite.hpp"
#include "mist/errors.hpp"
#include "mist/io.hpp"
#include "mist/kerr.hpp"

namespace mist {

std::string to_string(Transition t) {
    switch (t) {
        case Transition::omega10:
            return "omega10";
        case Transition::omega21:
            return "omega21";
        case Transition::omega_r:
            return "omega_r";
    }
    return "?";
}

Transition transition_from_string(const std::string& s) {
    if (s == "omega10") return Transition::omega10;
    if (s == "omega21") return Transition::omega21;
    if (s == "omega_r") return Transition::omega_r;
    throw ValidationError("unknown transition '" + s + "' (expected omega10, omega21 or omega_r)");
}

void SpectroscopyDataset::validate() const {
    if (points.empty()) throw ValidationError("dataset has no points");
    for (const auto& p : points) {
        if (!(p.frequency > 0.0) || !std::isfinite(p.frequency)) throw ValidationError("frequencies must be > 0");
        if (!(p.weight > 0.0) || !std::isfinite(p.weight)) throw ValidationError("weights must be > 0");
        if (!std::isfinite(p.bias)) throw ValidationError("bias must be finite");
    }
    if (!(bias_map.period != 0.0) || !std::isfinite(bias_map.period)) throw ValidationError("bias period must be nonzero");
}

int SpectroscopyDataset::count(Transition t) const {
    return static_cast<int>(std::count_if(points.begin(), points.end(), [t](const auto& p) { return p.transition == t; }));
}

SpectroscopyDataset SpectroscopyDataset::from_csv(const std::string& path, BiasMap map) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path);
    SpectroscopyDataset d;
    d.bias_map = map;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cols.push_back(c);
        if (!header_seen) {
            header_seen = true;
            if (!cols.empty() && cols[0] == "bias") continue;
        }
        if (cols.size() < 3 || cols.size() > 4)
            throw ValidationError("dataset line " + std::to_string(lineno) + ": expected bias,transition,freq_ghz[,weight]");
        SpectroscopyPoint p;
        try {
            p.bias = std::stod(cols[0]);
            p.transition = transition_from_string(cols[1]);
            p.frequency = std::stod(cols[2]);
            p.weight = cols.size() == 4 ? std::stod(cols[3]) : 1.0;
        } catch (const std::logic_error&) {
            throw ValidationError("dataset line " + std::to_string(lineno) + ": not a number");
        }
        d.points.push_back(p);
    }
    d.validate();
    return d;
}

void SpectroscopyDataset::to_csv(const std::string& path) const {
    std::ostringstream os;
    os << "# " << version_stamp() << "\n";
    os << "bias,transition,freq_ghz,weight\n";
    for (const auto& p : points)
        os << format_double(p.bias) << ',' << to_string(p.transition) << ',' << format_double(p.frequency) << ','
           << format_double(p.weight) << '\n';
    write_file_atomic(path, os.str());
}

namespace {

constexpr int fit_levels = 6;
constexpr int fit_res_levels = 3;

struct Predicted {
    double w10 = 0.0;
    double w21 = 0.0;
    double wr = 0.0;
    double splitting = 0.0;
};

Predicted predict_at(const CircuitParams& p, double phi, bool need_r) {
    const CircuitParams q = p.at_flux(phi);
    const QubitSpectrum s = diagonalize_ist(q, fit_levels, fit_basis_size, false);
    Predicted out;
    out.w10 = s.transition(1, 0);
    out.w21 = s.transition(2, 1);
    out.splitting = 2.0 * 2.0 * p.k_eff * std::sqrt(p.omega_r * p.e_c) * std::abs(s.charge_elements(0, 1));
    if (need_r) {
        // label ambiguity is tolerated here; the crossing window down-weights those points
        const CompositeSpace c = build_composite(q, s, fit_levels, fit_res_levels);
        out.wr = c.energy(0, 1) - c.energy(0, 0);
    }
    return out;
}

double pick(const Predicted& pr, Transition t) {
    switch (t) {
        case Transition::omega10:
            return pr.w10;
        case Transition::omega21:
            return pr.w21;
        case Transition::omega_r:
            return pr.wr;
    }
    return 0.0;
}

}  // namespace

double predict(const CircuitParams& params, const BiasMap& map, const SpectroscopyPoint& point) {
    return pick(predict_at(params, map.phi(point.bias), point.transition == Transition::omega_r), point.transition);
}

SpectroscopyDataset synthetic_dataset(const CircuitParams& truth, const BiasMap& map, int n10, int n21, int nr,
                                      double noise_ghz, std::uint64_t seed) {
    SpectroscopyDataset d;
    d.bias_map = map;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto add = [&](Transition t, int n) {
        for (int i = 0; i < n; ++i) {
            const double phi = n == 1 ? 0.0 : std::numbers::pi * i / (n - 1);
            SpectroscopyPoint p;
            p.bias = map.bias(phi);
            p.transition = t;
            p.frequency = predict(truth, map, p);
            if (noise_ghz > 0.0) p.frequency += noise_ghz * noise(rng);
            d.points.push_back(p);
        }
    };
    add(Transition::omega10, n10);
    add(Transition::omega21, n21);
    add(Transition::omega_r, nr);
    d.validate();
    return d;
}

namespace {

// Nelder-Mead on an unconstrained vector.
struct SimplexResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& step, int max_iter, double rel_tol, int window) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> fv(static_cast<std::size_t>(n + 1));
    for (int i = 0; i < n; ++i) pts[i + 1](i) += step(i);
    for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]);

    std::vector<int> idx(static_cast<std::size_t>(n + 1));
    std::vector<double> history;
    SimplexResult r;
    for (int it = 0; it < max_iter; ++it) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int best = idx[0], worst = idx[n], second = idx[n - 1];
        // simplex mean, since the best vertex can sit still while the simplex contracts
        history.push_back(std::accumulate(fv.begin(), fv.end(), 0.0) / (n + 1));
        r.iterations = it + 1;
        if (static_cast<int>(history.size()) > window) {
            const double old = history[history.size() - 1 - window];
            if (old - history.back() <= rel_tol * std::abs(old) || fv[best] == 0.0) {
                r.converged = true;
                break;
            }
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += pts[idx[i]];
        centroid /= n;
        const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
        const double fr = f(xr);
        if (fr < fv[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = f(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            const Eigen::VectorXd xc =
                outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid)) : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
            const double fc = f(xc);
            if (fc < std::min(fr, fv[worst])) {
                pts[worst] = xc;
                fv[worst] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    const int j = idx[i];
                    pts[j] = pts[best] + 0.5 * (pts[j] - pts[best]);
                    fv[j] = f(pts[j]);
                }
            }
        }
    }
    const auto b = std::min_element(fv.begin(), fv.end()) - fv.begin();
    r.x = pts[b];
    r.f = fv[b];
    return r;
}

constexpr int n_fit = 7;

struct Unpacked {
    CircuitParams p;
    BiasMap map;
    bool projected = false;
};

// x = [ln e_c, ln e_j, ln e_l, ln omega_r, ln k_eff, offset / period_0, ln period]
Unpacked unpack(const Eigen::VectorXd& x, const CircuitParams& base, double period0) {
    Unpacked u;
    u.p = base;
    u.p.e_c = std::exp(x(0));
    u.p.e_j = std::exp(x(1));
    u.p.e_l = std::exp(x(2));
    u.p.omega_r = std::exp(x(3));
    u.p.k_eff = std::exp(x(4));
    if (u.p.k_eff >= 0.999) {
        u.p.k_eff = 0.999;
        u.projected = true;
    }
    u.map.offset = x(5) * std::abs(period0);
    u.map.period = std::copysign(std::exp(x(6)), period0);
    return u;
}

Eigen::VectorXd pack(const CircuitParams& p, const BiasMap& m, double period0) {
    Eigen::VectorXd x(n_fit);
    x << std::log(p.e_c), std::log(std::max(p.e_j, 1e-6)), std::log(p.e_l), std::log(p.omega_r),
        std::log(std::max(p.k_eff, 1e-6)), m.offset / std::abs(period0), std::log(std::abs(m.period));
    return x;
}

std::vector<double> residuals(const SpectroscopyDataset& d, const CircuitParams& p, const BiasMap& m) {
    std::vector<double> r;
    r.reserve(d.points.size());
    for (const auto& pt : d.points) r.push_back(predict(p, m, pt) - pt.frequency);
    return r;
}

}  // namespace

std::vector<double> effective_weights(const SpectroscopyDataset& dataset, const CircuitParams& params,
                                      const BiasMap& map, const FitOptions& options) {
    std::vector<double> w;
    for (const auto& pt : dataset.points) {
        double wt = pt.weight;
        try {
            const Predicted pr = predict_at(params, map.phi(pt.bias), false);
            if (std::abs(pr.w10 - params.omega_r) < options.crossing_window * pr.splitting)
                wt *= options.crossing_weight_factor;
        } catch (const Error&) {
        }
        w.push_back(wt);
    }
    return w;
}

namespace {

double kerr_or_bare_w10(const CircuitParams& p) {
    try {
        return kerr_params(p).omega_q;
    } catch (const SingularityError&) {
        const Displacement s = solve_displacement_impedance(p);
        return bare_kerr_params(p, s.xi, s.phi_star).omega_0;
    }
}

double kerr_or_bare_eta(const CircuitParams& p) {
    try {
        return kerr_params(p).eta_q;
    } catch (const SingularityError&) {
        const Displacement s = solve_displacement_impedance(p);
        return bare_kerr_params(p, s.xi, s.phi_star).eta_0;
    }
}

}  // namespace

CircuitParams initial_guess(const SpectroscopyDataset& dataset) {
    std::vector<std::string> missing;
    if (dataset.count(Transition::omega10) == 0) missing.push_back("omega10");
    if (dataset.count(Transition::omega_r) == 0) missing.push_back("omega_r");
    if (!missing.empty()) {
        std::string m;
        for (const auto& s : missing) m += (m.empty() ? "" : ", ") + s;
        throw ValidationError("cannot seed the fit: missing observables: " + m);
    }

    const SpectroscopyPoint* pmax = nullptr;
    const SpectroscopyPoint* pmin = nullptr;
    for (const auto& p : dataset.points) {
        if (p.transition != Transition::omega10) continue;
        if (!pmax || p.frequency > pmax->frequency) pmax = &p;
        if (!pmin || p.frequency < pmin->frequency) pmin = &p;
    }
    auto nearest21 = [&](const SpectroscopyPoint* ref) -> double {
        const SpectroscopyPoint* best = nullptr;
        for (const auto& p : dataset.points)
            if (p.transition == Transition::omega21 &&
                (!best || std::abs(p.bias - ref->bias) < std::abs(best->bias - ref->bias)))
                best = &p;
        // anharmonicity only when the omega21 point sits at the same bias
        if (!best || std::abs(best->bias - ref->bias) > 1e-3 * std::abs(dataset.bias_map.period)) return NAN;
        return ref->frequency - best->frequency;
    };
    const double wmax = pmax->frequency, wmin = pmin->frequency;
    const double eta_max = nearest21(pmax);
    const double eta_min = nearest21(pmin);

    CircuitParams g;
    g.kappa_r = 0.0;
    g.phi_ext = 0.0;
    double e_c0 = std::isfinite(eta_max) && eta_max > 0.0 ? eta_max : 0.25;
    const bool harmonic = wmax - wmin < 1e-6 * wmax && !(std::isfinite(eta_max) && eta_max > 1e-6 * wmax);
    if (harmonic) {
        g.e_c = e_c0;
        g.e_j = 0.0;
        g.e_l = wmax * wmax / (8.0 * e_c0);
    } else {
        // harmonic estimates at the two sweet spots, then matched to the Kerr closed forms
        g.e_c = e_c0;
        g.e_l = (wmax * wmax + wmin * wmin) / (16.0 * e_c0);
        g.e_j = std::max((wmax * wmax - wmin * wmin) / (16.0 * e_c0), 1e-3);
        g.omega_r = 1.0;
        const bool have_eta = std::isfinite(eta_max);
        auto obj = [&](const Eigen::VectorXd& x) {
            CircuitParams p = g;
            p.e_c = have_eta ? std::exp(x(0)) : e_c0;
            p.e_j = std::exp(x(1));
            p.e_l = std::exp(x(2));
            try {
                double s = std::pow(kerr_or_bare_w10(p.at_flux(0.0)) / wmax - 1.0, 2) +
                           std::pow(kerr_or_bare_w10(p.at_flux(std::numbers::pi)) / wmin - 1.0, 2);
                if (have_eta) s += 0.1 * std::pow(kerr_or_bare_eta(p.at_flux(0.0)) / eta_max - 1.0, 2);
                if (std::isfinite(eta_min) && eta_min != 0.0)
                    s += 0.1 * std::pow(kerr_or_bare_eta(p.at_flux(std::numbers::pi)) / eta_min - 1.0, 2);
                return s;
            } catch (const Error&) {
                return 1e6;
            }
        };
        Eigen::VectorXd x0(3);
        x0 << std::log(g.e_c), std::log(g.e_j), std::log(g.e_l);
        const SimplexResult r = nelder_mead(obj, x0, Eigen::VectorXd::Constant(3, 0.1), 600, 1e-12, 20);
        if (r.f < obj(x0)) {
            g.e_c = have_eta ? std::exp(r.x(0)) : e_c0;
            g.e_j = std::exp(r.x(1));
            g.e_l = std::exp(r.x(2));
        }
    }

    // omega_r and k_eff from the dispersive pull: wr_i = wr0 + k^2 P_i
    std::vector<double> pull, wr;
    for (const auto& p : dataset.points) {
        if (p.transition != Transition::omega_r) continue;
        wr.push_back(p.frequency);
        double sum = 0.0;
        try {
            CircuitParams q = g;
            q.omega_r = p.frequency;
            q.k_eff = 0.0;
            const QubitSpectrum s = diagonalize_ist(q.at_flux(dataset.bias_map.phi(p.bias)), fit_levels, fit_basis_size, false);
            const double w = p.frequency;
            for (int l = 1; l < fit_levels; ++l) {
                const double wl = s.transition(l, 0);
                sum += 4.0 * w * g.e_c * std::norm(s.charge_elements(0, l)) * 2.0 * wl / (w * w - wl * wl);
            }
        } catch (const Error&) {
            sum = 0.0;
        }
        pull.push_back(sum);
    }
    const double n = static_cast<double>(wr.size());
    const double mp = std::accumulate(pull.begin(), pull.end(), 0.0) / n;
    const double mw = std::accumulate(wr.begin(), wr.end(), 0.0) / n;
    double spp = 0.0, spw = 0.0;
    for (std::size_t i = 0; i < wr.size(); ++i) {
        spp += (pull[i] - mp) * (pull[i] - mp);
        spw += (pull[i] - mp) * (wr[i] - mw);
    }
    double k2 = spp > 0.0 ? spw / spp : 0.0;
    if (!(k2 > 0.0) || k2 >= 0.25) {
        g.k_eff = 0.05;
        g.omega_r = mw;
    } else {
        g.k_eff = std::sqrt(k2);
        g.omega_r = mw - k2 * mp;
    }
    g.validate();
    return g;
}

FitResult fit_circuit(const SpectroscopyDataset& dataset, const CircuitParams& seed, const FitOptions& options) {
    return fit_circuit(dataset, seed, dataset.bias_map, options);
}

FitResult fit_circuit(const SpectroscopyDataset& dataset, const CircuitParams& seed, const BiasMap& seed_map,
                      const FitOptions& options) {
    dataset.validate();
    seed.validate();
    if (dataset.count(Transition::omega10) == 0) throw ValidationError("fit needs at least one omega10 point");
    const double period0 = seed_map.period;

    std::vector<double> weights = effective_weights(dataset, seed, seed_map, options);
    bool any_projected = false;
    auto objective = [&](const Eigen::VectorXd& x) {
        const Unpacked u = unpack(x, seed, period0);
        any_projected = any_projected || u.projected;
        double s = 0.0;
        try {
            u.p.validate();
            for (std::size_t i = 0; i < dataset.points.size(); ++i) {
                const double r = predict(u.p, u.map, dataset.points[i]) - dataset.points[i].frequency;
                s += weights[i] * r * r;
            }
        } catch (const Error&) {
            return std::numeric_limits<double>::max();
        }
        return std::isfinite(s) ? s : std::numeric_limits<double>::max();
    };

    Eigen::VectorXd x = pack(seed, seed_map, period0);
    Eigen::VectorXd step(n_fit);
    step << 0.05, 0.05, 0.05, 0.01, 0.1, 0.01, 0.02;
    FitResult out;
    double fbest = objective(x);
    for (int restart = 0; restart <= options.max_restarts; ++restart) {
        const double before = objective(x);
        const SimplexResult r =
            nelder_mead(objective, x, step, options.max_iterations, options.rel_tolerance, options.stall_window);
        out.iterations += r.iterations;
        out.restarts = restart;
        if (r.f <= before) x = r.x;
        const double gain = before - std::min(r.f, before);
        // crossing windows follow the current parameters
        const Unpacked cur = unpack(x, seed, period0);
        weights = effective_weights(dataset, cur.p, cur.map, options);
        fbest = objective(x);
        step *= 0.5;
        if (fbest == 0.0 || (restart > 0 && gain <= options.rel_tolerance * before)) {
            out.converged = true;
            break;
        }
    }

    const Unpacked u = unpack(x, seed, period0);
    out.params = u.p;
    out.bias_map = u.map;
    out.projected = any_projected && u.projected;
    out.weights = weights;
    out.residuals = residuals(dataset, u.p, u.map);
    double ss = 0.0;
    for (const double r : out.residuals) ss += r * r;
    out.rms_residual = std::sqrt(ss / static_cast<double>(out.residuals.size()));
    out.objective = fbest;

    // covariance from a central-difference Jacobian in natural units
    std::array<double, n_fit> nat = {u.p.e_c, u.p.e_j, u.p.e_l, u.p.omega_r, u.p.k_eff, u.map.offset, u.map.period};
    auto with = [&](int i, double v) {
        Unpacked w = u;
        double* slots[n_fit] = {&w.p.e_c, &w.p.e_j, &w.p.e_l, &w.p.omega_r, &w.p.k_eff, &w.map.offset, &w.map.period};
        *slots[i] = v;
        return w;
    };
    const int npts = static_cast<int>(dataset.points.size());
    Eigen::MatrixXd jac(npts, n_fit);
    bool jac_ok = true;
    for (int i = 0; i < n_fit && jac_ok; ++i) {
        const double h = 1e-6 * std::max(std::abs(nat[i]), 1e-3);
        try {
            const Unpacked a = with(i, nat[i] + h), b = with(i, nat[i] - h);
            const auto ra = residuals(dataset, a.p, a.map), rb = residuals(dataset, b.p, b.map);
            for (int k = 0; k < npts; ++k) jac(k, i) = std::sqrt(weights[k]) * (ra[k] - rb[k]) / (2.0 * h);
        } catch (const Error&) {
            jac_ok = false;
        }
    }
    if (jac_ok && npts > n_fit) {
        double wss = 0.0;
        for (int k = 0; k < npts; ++k) wss += weights[k] * out.residuals[k] * out.residuals[k];
        const double s2 = wss / (npts - n_fit);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        out.covariance = s2 * jtj.completeOrthogonalDecomposition().pseudoInverse();
    } else {
        out.covariance = Eigen::MatrixXd::Constant(n_fit, n_fit, NAN);
    }
    return out;
}

std::string to_json(const FitResult& r) {
    nlohmann::ordered_json j;
    j["version"] = MIST_VERSION;
    j["params"] = {{"e_c_ghz", r.params.e_c},         {"e_j_ghz", r.params.e_j}, {"e_l_ghz", r.params.e_l},
                   {"omega_r_ghz", r.params.omega_r}, {"k_eff", r.params.k_eff}, {"kappa_r_ghz", r.params.kappa_r},
                   {"phi_ext_rad", r.params.phi_ext}};
    j["bias_map"] = {{"offset", r.bias_map.offset}, {"period", r.bias_map.period}};
    j["residuals_ghz"] = r.residuals;
    j["rms_residual_ghz"] = r.rms_residual;
    j["objective"] = r.objective;
    std::vector<std::vector<double>> cov;
    for (int i = 0; i < r.covariance.rows(); ++i) {
        std::vector<double> row;
        for (int k = 0; k < r.covariance.cols(); ++k) {
            const double v = r.covariance(i, k);
            row.push_back(std::isfinite(v) ? v : 0.0);
        }
        cov.push_back(row);
    }
    j["covariance_order"] = {"e_c", "e_j", "e_l", "omega_r", "k_eff", "offset", "period"};
    j["covariance"] = cov;
    j["iterations"] = r.iterations;
    j["restarts"] = r.restarts;
    j["converged"] = r.converged;
    j["projected"] = r.projected;
    return j.dump(2);
}

}  // namespace mist
