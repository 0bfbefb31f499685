#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mist/params.hpp"

namespace mist {

struct ProtocolConfig {
    double t_on_kappa = 10.0;   // t_on in units of 1/kappa
    double t_off_kappa = 10.0;  // t_off in units of 1/kappa
    std::optional<double> kappa_override_ghz;

    bool operator==(const ProtocolConfig&) const = default;
};

struct ToleranceConfig {
    double lindblad_atol = 1e-8;
    double trace_tolerance = 1e-6;
    double schrodinger_atol = 1e-10;
    double floquet_atol = 1e-10;

    bool operator==(const ToleranceConfig&) const = default;
};

struct OutputConfig {
    std::string directory = ".";
    std::vector<std::string> formats = {"csv"};

    bool operator==(const OutputConfig&) const = default;
};

// INI-style file. Sections: [qubit] [protocol] [tolerance] [output]. Unknown keys are errors.
struct RunConfig {
    CircuitParams qubit;
    ProtocolConfig protocol;
    ToleranceConfig tolerance;
    OutputConfig output;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& config);

}  // namespace mist
