// mist: command-line front end.
// Exit codes: 0 ok, 1 usage or invalid input, 2 computation failure, 3 I/O failure.

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mist/circuit.hpp"
#include "mist/composite.hpp"
#include "mist/config.hpp"
#include "mist/errors.hpp"
#include "mist/fitting.hpp"
#include "mist/io.hpp"
#include "mist/kerr.hpp"
#include "mist/purcell.hpp"
#include "mist/quantum_sim.hpp"
#include "mist/semiclassical.hpp"
#include "mist/sweep.hpp"

using namespace mist;
using nlohmann::ordered_json;

namespace {

constexpr double pi = std::numbers::pi;

struct Common {
    std::string config;
    std::optional<double> phi_ext;
    std::optional<double> freq_ghz;
    std::string out;
    int levels = 0;
};

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-")
        std::cout << text << std::flush;
    else
        write_file_atomic(out, text);
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

// Operating flux from --freq-ghz, --phi-ext or the config, in that order.
CircuitParams operating_point(const RunConfig& cfg, const Common& c) {
    if (c.freq_ghz) return cfg.qubit.at_flux(flux_for_frequency(cfg.qubit, *c.freq_ghz));
    if (c.phi_ext) return cfg.qubit.at_flux(*c.phi_ext);
    return cfg.qubit;
}

std::vector<double> flux_grid(const RunConfig& cfg, const Common& c, int points) {
    if (c.freq_ghz || c.phi_ext) return {operating_point(cfg, c).phi_ext};
    if (points < 1) throw ValidationError("--points must be >= 1");
    std::vector<double> g;
    for (int i = 0; i < points; ++i) g.push_back(points == 1 ? 0.0 : pi * i / (points - 1));
    return g;
}

void add_common(CLI::App* sub, Common& c, bool needs_config = true) {
    auto* opt = sub->add_option("--config", c.config, "qubit configuration file");
    if (needs_config) opt->required();
    auto* phi = sub->add_option("--phi-ext", c.phi_ext, "external flux, rad");
    auto* freq = sub->add_option("--freq-ghz", c.freq_ghz, "operate where omega10 equals this frequency");
    phi->excludes(freq);
    sub->add_option("--out", c.out, "output path (default stdout)");
}

// ---------------------------------------------------------------- spectrum

void run_spectrum(const Common& c, int points) {
    const RunConfig cfg = load_config(c.config);
    const int nq = c.levels > 0 ? c.levels : 8;
    std::ostringstream os;
    os << "# " << version_stamp() << "\n";
    os << "phi_ext_rad,omega10_ghz,omega21_ghz,omega_r_dressed_ghz,chi_mhz\n";
    for (const double phi : flux_grid(cfg, c, points)) {
        const CircuitParams p = cfg.qubit.at_flux(phi);
        const QubitSpectrum s = diagonalize_ist(p, nq);
        double wr = std::numeric_limits<double>::quiet_NaN(), chi = wr;
        try {
            const CompositeSpace space = build_composite(p, s, nq, 6);
            wr = dressed_resonator_frequency(space, 0);
            chi = numeric_chi_and_lamb(space).chi * 1e3;
        } catch (const RangeError&) {
            // labels too hybridized near the qubit-resonator crossing
        }
        os << num(phi) << ',' << num(s.transition(1, 0)) << ',' << num(s.transition(2, 1)) << ',' << num(wr) << ','
           << num(chi) << '\n';
    }
    emit(c.out, os.str());
}

// ---------------------------------------------------------------- kerr

void run_kerr(const Common& c) {
    const RunConfig cfg = load_config(c.config);
    const CircuitParams p = operating_point(cfg, c);
    const KerrParams k = kerr_params(p);
    const auto res = kerr_residuals(p, k.xi, k.phi_star);
    if (std::abs(res[0]) > 1e-12 || std::abs(res[1]) > 1e-12) throw InternalError("stationarity residuals above 1e-12");
    ordered_json j;
    j["version"] = MIST_VERSION;
    j["phi_ext"] = p.phi_ext;
    j["xi"] = k.xi;
    j["phi_star"] = k.phi_star;
    j["phi_ext_star"] = k.phi_ext_star;
    j["omega_0_ghz"] = k.omega_0;
    j["eta_0_ghz"] = k.eta_0;
    j["omega_q_ghz"] = k.omega_q;
    j["eta_q_ghz"] = k.eta_q;
    j["g_qr_ghz"] = k.g_qr;
    j["chi_ghz"] = dispersive_shift(k.omega_q, k.eta_q, p.omega_r, k.g_qr);
    j["residual_xi"] = res[0];
    j["residual_phi"] = res[1];
    emit(c.out, j.dump(2) + "\n");
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string data;
    std::string make_synthetic;
    double offset = 0.0;
    double period = 1.0;
    double noise = 0.0;
};

void run_fit(const Common& c, const FitArgs& a) {
    const BiasMap map{a.offset, a.period};
    if (!a.make_synthetic.empty()) {
        if (c.config.empty()) throw ValidationError("--make-synthetic needs --config");
        synthetic_dataset(load_config(c.config).qubit, map, 24, 6, 6, a.noise).to_csv(a.make_synthetic);
        return;
    }
    if (a.data.empty()) throw ValidationError("fit needs --data");
    const SpectroscopyDataset d = SpectroscopyDataset::from_csv(a.data, map);
    const CircuitParams seed = c.config.empty() ? initial_guess(d) : load_config(c.config).qubit;
    const FitResult r = fit_circuit(d, seed, map);
    emit(c.out, to_json(r) + "\n");
}

// ---------------------------------------------------------------- mist

struct MistArgs {
    std::string backend = "quantum";
    double n_bar = 0.0;
    int init = 0;
};

void run_mist(const Common& c, const MistArgs& a) {
    const RunConfig cfg = load_config(c.config);
    const CircuitParams p = operating_point(cfg, c);
    const Backend b = backend_from_string(a.backend);
    MistResult r;
    if (b == Backend::quantum) {
        QuantumOptions o;
        if (c.levels > 0) o.n_ist_levels = c.levels;
        o.kappa_r = cfg.protocol.kappa_override_ghz;
        o.on_mult = cfg.protocol.t_on_kappa;
        o.off_mult = cfg.protocol.t_off_kappa;
        o.lindblad.atol = cfg.tolerance.lindblad_atol;
        o.lindblad.trace_tolerance = cfg.tolerance.trace_tolerance;
        r = mist_quantum(p, a.n_bar, a.init, o);
    } else {
        SemiclassicalOptions o;
        if (c.levels > 0) o.m = c.levels;
        o.kappa_r = cfg.protocol.kappa_override_ghz;
        o.on_mult = cfg.protocol.t_on_kappa;
        o.off_mult = cfg.protocol.t_off_kappa;
        o.atol = cfg.tolerance.schrodinger_atol;
        const auto model =
            b == Backend::semiclassical_simple ? SemiclassicalModel::simple : SemiclassicalModel::renormalized;
        r = mist_semiclassical(p, a.n_bar, a.init, model, o);
    }
    emit(c.out, to_json(r) + "\n");
}

// ---------------------------------------------------------------- floquet

struct FloquetArgs {
    std::string backend = "semiclassical-renormalized";
    double n_max = 20.0;
    double step = 0.25;
    std::string crossings;
};

void run_floquet(const Common& c, const FloquetArgs& a) {
    const RunConfig cfg = load_config(c.config);
    const CircuitParams p = operating_point(cfg, c);
    const Backend b = backend_from_string(a.backend);
    if (b == Backend::quantum) throw ValidationError("floquet needs a semiclassical backend");
    const auto model = b == Backend::semiclassical_simple ? SemiclassicalModel::simple : SemiclassicalModel::renormalized;
    if (!(a.step > 0.0) || !(a.n_max >= 0.0)) throw ValidationError("--step must be > 0 and --nbar >= 0");
    const int m = c.levels > 0 ? c.levels : 20;
    const QubitSpectrum s = diagonalize_ist(p, m);
    const double wd = dressed_resonator_frequency(build_composite(p, s, m, 4), 0);
    std::vector<double> grid;
    for (int j = 0; j * a.step <= a.n_max + 1e-12; ++j) grid.push_back(j * a.step);
    FloquetOptions fo;
    fo.atol = cfg.tolerance.floquet_atol;
    const FloquetSpectrum f = floquet_quasienergies(s, p, grid, m, model, wd, fo);

    std::ostringstream os;
    os << "# " << version_stamp() << " omega_d_ghz " << format_double(wd) << "\n";
    os << "photon_number,branch_k,quasienergy_ghz\n";
    for (std::size_t g = 0; g < grid.size(); ++g)
        for (std::size_t k = 0; k < f.quasienergies[g].size(); ++k)
            os << num(grid[g]) << ',' << f.branch_labels[g][k] << ',' << num(f.quasienergies[g][k]) << '\n';
    emit(c.out, os.str());

    ordered_json j;
    j["version"] = MIST_VERSION;
    j["omega_d_ghz"] = wd;
    j["model"] = to_string(b);
    j["crossings"] = ordered_json::array();
    for (const auto& x : f.crossings)
        j["crossings"].push_back({{"k_a", x.k_a}, {"k_b", x.k_b}, {"photons", x.photons}, {"gap_ghz", x.gap}});
    std::string side = a.crossings;
    if (side.empty() && !c.out.empty() && c.out != "-") side = c.out + ".crossings.json";
    if (!side.empty()) write_file_atomic(side, j.dump(2) + "\n");
}

// ---------------------------------------------------------------- purcell

Element element_from_json(const nlohmann::json& e) {
    const std::string kind = e.at("element").get<std::string>();
    auto v = [&](const char* key) { return e.at(key).get<double>(); };
    if (kind == "resistor") return Element::resistor(v("r"));
    if (kind == "inductor") return Element::inductor(v("l"));
    if (kind == "capacitor") return Element::capacitor(v("c"));
    if (kind == "tank") return Element::tank(v("l"), v("c"), e.value("q", default_internal_q));
    if (kind == "parallel_lcr") return Element::parallel_lcr(v("l"), v("c"), v("r"));
    if (kind == "series_lcr") return Element::series_lcr(v("l"), v("c"), v("r"));
    throw ValidationError("unknown network element '" + kind + "'");
}

// {"stages": [{"placement": "series"|"shunt", "element": "capacitor", "c": 3e-15}, ...]}, SI units
ReadoutNetwork load_network(const std::string& path) {
    ReadoutNetwork n;
    try {
        const auto j = nlohmann::json::parse(read_file(path));
        for (const auto& st : j.at("stages")) {
            const std::string where = st.at("placement").get<std::string>();
            if (where == "series")
                n.series(element_from_json(st));
            else if (where == "shunt")
                n.shunt(element_from_json(st));
            else
                throw ValidationError("placement must be series or shunt");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    n.validate();
    return n;
}

struct PurcellArgs {
    std::string network;
    std::string impedance;
    int points = 101;
};

void run_purcell(const Common& c, const PurcellArgs& a) {
    if (a.network.empty() == a.impedance.empty()) throw ValidationError("give exactly one of --network or --impedance");
    const RunConfig cfg = load_config(c.config);
    std::optional<ReadoutNetwork> net;
    std::optional<TabulatedImpedance> table;
    if (!a.network.empty())
        net = load_network(a.network);
    else
        table = TabulatedImpedance::from_csv(a.impedance);
    std::ostringstream os;
    os << "# " << version_stamp() << "\n";
    os << "phi_ext_rad,omega10_ghz,t1_us\n";
    for (const double phi : flux_grid(cfg, c, a.points)) {
        const CircuitParams p = cfg.qubit.at_flux(phi);
        const QubitSpectrum s = diagonalize_ist(p, c.levels > 0 ? c.levels : 4);
        double t1 = std::numeric_limits<double>::quiet_NaN();
        try {
            t1 = net ? purcell_t1(p, s, *net).t1 : purcell_t1(s, *table).t1;
        } catch (const RangeError&) {
            // outside the tabulated band
        }
        os << num(phi) << ',' << num(s.transition(1, 0)) << ',' << (std::isinf(t1) ? "inf" : num(t1)) << '\n';
    }
    emit(c.out, os.str());
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
    std::string plan;
    std::string checkpoint;
    std::string format = "csv";
    int parallelism = 0;
};

int workers(const SweepArgs& a) {
    if (a.parallelism > 0) return a.parallelism;
    return std::max(1u, std::thread::hardware_concurrency());
}

void report(const LeakageMap& m, const Common& c, const SweepArgs& a) {
    std::cerr << m.count(CellStatus::done) << "/" << m.plan.cells() << " cells done, " << m.count(CellStatus::failed)
              << " failed, plan " << plan_id_hex(m.plan_id) << "\n";
    if (!c.out.empty()) export_map(m, c.out, export_format_from_string(a.format));
}

void run_sweep_cmd(const Common& c, const SweepArgs& a) {
    const SweepPlan plan = SweepPlan::from_json(read_file(a.plan));
    report(run_sweep(plan, workers(a), a.checkpoint), c, a);
}

void resume_sweep_cmd(const Common& c, const SweepArgs& a) {
    std::optional<SweepPlan> expected;
    if (!a.plan.empty()) expected = SweepPlan::from_json(read_file(a.plan));
    report(resume_sweep(a.checkpoint, workers(a), expected ? &*expected : nullptr), c, a);
}

void export_sweep_cmd(const Common& c, const SweepArgs& a) {
    const LeakageMap m = read_checkpoint(a.checkpoint);
    const auto f = export_format_from_string(a.format);
    if (c.out.empty() || c.out == "-") {
        if (m.count(CellStatus::pending) > 0) throw ValidationError("checkpoint has pending cells; resume it first");
        std::cout << (f == ExportFormat::csv ? map_to_csv(m) : f == ExportFormat::json ? map_to_json(m) : map_to_svg(m));
    } else {
        export_map(m, c.out, f);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MIST analysis for inductively-shunted transmons"};
    app.set_version_flag("--version", version_stamp());
    app.require_subcommand(1);

    Common spec_c, kerr_c, fit_c, mist_c, floq_c, purc_c, sweep_c;
    int spec_points = 61;
    auto* spectrum = app.add_subcommand("spectrum", "bare and dressed spectrum vs flux, CSV");
    add_common(spectrum, spec_c);
    spectrum->add_option("--levels", spec_c.levels, "IST levels in the composite (default 8)");
    spectrum->add_option("--points", spec_points, "flux points over [0, pi] when no operating point is given");

    auto* kerr = app.add_subcommand("kerr", "Kerr reduction at one flux, JSON");
    add_common(kerr, kerr_c);

    FitArgs fit_a;
    auto* fit = app.add_subcommand("fit", "fit circuit parameters to spectroscopy, JSON");
    add_common(fit, fit_c, false);
    fit->add_option("--data", fit_a.data, "spectroscopy CSV: bias,transition,freq_ghz,weight");
    fit->add_option("--bias-offset", fit_a.offset, "bias at zero flux (seed)");
    fit->add_option("--bias-period", fit_a.period, "bias per flux quantum (seed)");
    fit->add_option("--make-synthetic", fit_a.make_synthetic, "write a synthetic dataset from --config and exit");
    fit->add_option("--noise-ghz", fit_a.noise, "gaussian noise for --make-synthetic");

    MistArgs mist_a;
    auto* mist = app.add_subcommand("mist", "one drive-and-ringdown run, JSON");
    add_common(mist, mist_c);
    mist->add_option("--backend", mist_a.backend, "quantum, semiclassical-simple or semiclassical-renormalized");
    mist->add_option("--nbar", mist_a.n_bar, "target steady-state photon number")->required();
    mist->add_option("--init", mist_a.init, "initial qubit state")->check(CLI::IsMember({0, 1}));
    mist->add_option("--levels", mist_c.levels, "IST levels (quantum) or M (semiclassical)");

    FloquetArgs floq_a;
    auto* floquet = app.add_subcommand("floquet", "fixed-amplitude quasienergies vs photon number, CSV");
    add_common(floquet, floq_c);
    floquet->add_option("--backend", floq_a.backend, "semiclassical-simple or semiclassical-renormalized");
    floquet->add_option("--nbar", floq_a.n_max, "largest |alpha|^2 on the grid");
    floquet->add_option("--step", floq_a.step, "photon grid spacing");
    floquet->add_option("--levels", floq_c.levels, "qubit levels M (default 20)");
    floquet->add_option("--crossings", floq_a.crossings, "crossings JSON path (default <out>.crossings.json)");

    PurcellArgs purc_a;
    auto* purcell = app.add_subcommand("purcell", "golden-rule T1 vs flux, CSV");
    add_common(purcell, purc_c);
    purcell->add_option("--network", purc_a.network, "ladder network JSON");
    purcell->add_option("--impedance", purc_a.impedance, "impedance CSV: freq_ghz,re_ohm,im_ohm");
    purcell->add_option("--points", purc_a.points, "flux points over [0, pi] when no operating point is given");
    purcell->add_option("--levels", purc_c.levels, "IST levels (default 4)");

    SweepArgs sweep_a;
    auto* sweep = app.add_subcommand("sweep", "checkpointed leakage maps");
    sweep->require_subcommand(1);
    auto* s_run = sweep->add_subcommand("run", "start a sweep from a plan");
    auto* s_resume = sweep->add_subcommand("resume", "finish a checkpointed sweep");
    auto* s_export = sweep->add_subcommand("export", "export a checkpoint");
    for (auto* s : {s_run, s_resume, s_export}) {
        s->add_option("--checkpoint", sweep_a.checkpoint, "checkpoint file")->required();
        s->add_option("--out", sweep_c.out, "export path");
        s->add_option("--format", sweep_a.format, "csv, json or svg");
    }
    for (auto* s : {s_run, s_resume}) s->add_option("--parallelism", sweep_a.parallelism, "worker threads");
    s_run->add_option("--plan", sweep_a.plan, "plan JSON")->required();
    s_resume->add_option("--plan", sweep_a.plan, "plan JSON to check the checkpoint against");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*spectrum) run_spectrum(spec_c, spec_points);
        else if (*kerr) run_kerr(kerr_c);
        else if (*fit) run_fit(fit_c, fit_a);
        else if (*mist) run_mist(mist_c, mist_a);
        else if (*floquet) run_floquet(floq_c, floq_a);
        else if (*purcell) run_purcell(purc_c, purc_a);
        else if (*s_run) run_sweep_cmd(sweep_c, sweep_a);
        else if (*s_resume) resume_sweep_cmd(sweep_c, sweep_a);
        else if (*s_export) export_sweep_cmd(sweep_c, sweep_a);
    } catch (const ValidationError& e) {
        std::cerr << "mist: invalid input: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "mist: I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "mist: computation failed: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
