#include "mist/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mist/errors.hpp"
#include "mist/io.hpp"

namespace mist {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_number(const std::string& v, const std::string& where) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) throw ValidationError(where + ": '" + v + "' is not a number");
    return out;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](double& slot) -> Setter {
        return [&slot](const std::string& v, const std::string& w) { slot = to_number(v, w); };
    };
    std::map<std::string, std::map<std::string, Setter>> table;
    table["qubit"] = {{"e_c_ghz", num(cfg.qubit.e_c)},         {"e_j_ghz", num(cfg.qubit.e_j)},
                      {"e_l_ghz", num(cfg.qubit.e_l)},         {"omega_r_ghz", num(cfg.qubit.omega_r)},
                      {"k_eff", num(cfg.qubit.k_eff)},         {"kappa_r_ghz", num(cfg.qubit.kappa_r)},
                      {"phi_ext_rad", num(cfg.qubit.phi_ext)}};
    table["protocol"] = {{"t_on_kappa", num(cfg.protocol.t_on_kappa)},
                         {"t_off_kappa", num(cfg.protocol.t_off_kappa)},
                         {"kappa_override_ghz", [&](const std::string& v, const std::string& w) {
                              cfg.protocol.kappa_override_ghz = to_number(v, w);
                          }}};
    table["tolerance"] = {{"lindblad_atol", num(cfg.tolerance.lindblad_atol)},
                          {"trace_tolerance", num(cfg.tolerance.trace_tolerance)},
                          {"schrodinger_atol", num(cfg.tolerance.schrodinger_atol)},
                          {"floquet_atol", num(cfg.tolerance.floquet_atol)}};
    table["output"] = {{"directory", [&](const std::string& v, const std::string&) { cfg.output.directory = v; }},
                       {"formats", [&](const std::string& v, const std::string&) { cfg.output.formats = split_list(v); }}};

    const std::set<std::string> required = {"e_c_ghz", "e_j_ghz", "e_l_ghz", "omega_r_ghz", "k_eff", "kappa_r_ghz"};
    std::set<std::string> seen_qubit;
    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string where = "config line " + std::to_string(lineno);
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ValidationError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!table.count(section)) throw ValidationError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
        if (section.empty()) throw ValidationError(where + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto& keys = table[section];
        const auto it = keys.find(key);
        if (it == keys.end()) throw ValidationError(where + ": unknown key '" + key + "' in [" + section + "]");
        if (!seen.insert(section + "." + key).second) throw ValidationError(where + ": duplicate key '" + key + "'");
        it->second(value, where);
        if (section == "qubit") seen_qubit.insert(key);
    }
    std::string missing;
    for (const auto& k : required)
        if (!seen_qubit.count(k)) missing += (missing.empty() ? "" : ", ") + k;
    if (!missing.empty()) throw ValidationError("config [qubit] is missing: " + missing);
    cfg.qubit.validate();
    if (!(cfg.protocol.t_on_kappa >= 0.0) || !(cfg.protocol.t_off_kappa >= 0.0))
        throw ValidationError("protocol multipliers must be >= 0");
    if (cfg.output.formats.empty()) throw ValidationError("output formats list is empty");
    return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "# " << version_stamp() << "\n";
    os << "[qubit]\n";
    os << "e_c_ghz = " << format_double(c.qubit.e_c) << "\n";
    os << "e_j_ghz = " << format_double(c.qubit.e_j) << "\n";
    os << "e_l_ghz = " << format_double(c.qubit.e_l) << "\n";
    os << "omega_r_ghz = " << format_double(c.qubit.omega_r) << "\n";
    os << "k_eff = " << format_double(c.qubit.k_eff) << "\n";
    os << "kappa_r_ghz = " << format_double(c.qubit.kappa_r) << "\n";
    os << "phi_ext_rad = " << format_double(c.qubit.phi_ext) << "\n\n";
    os << "[protocol]\n";
    os << "t_on_kappa = " << format_double(c.protocol.t_on_kappa) << "\n";
    os << "t_off_kappa = " << format_double(c.protocol.t_off_kappa) << "\n";
    if (c.protocol.kappa_override_ghz)
        os << "kappa_override_ghz = " << format_double(*c.protocol.kappa_override_ghz) << "\n";
    os << "\n[tolerance]\n";
    os << "lindblad_atol = " << format_double(c.tolerance.lindblad_atol) << "\n";
    os << "trace_tolerance = " << format_double(c.tolerance.trace_tolerance) << "\n";
    os << "schrodinger_atol = " << format_double(c.tolerance.schrodinger_atol) << "\n";
    os << "floquet_atol = " << format_double(c.tolerance.floquet_atol) << "\n\n";
    os << "[output]\n";
    os << "directory = " << c.output.directory << "\n";
    os << "formats = ";
    for (std::size_t i = 0; i < c.output.formats.size(); ++i) os << (i ? "," : "") << c.output.formats[i];
    os << "\n";
    return os.str();
}

}  // namespace mist
