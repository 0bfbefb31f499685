#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mist/circuit.hpp"
#include "mist/params.hpp"

namespace mist {

enum class Backend { quantum, semiclassical_simple, semiclassical_renormalized };
std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

enum class GridAxis { frequency, phi };

struct SweepOverrides {
    std::optional<int> n_ist_levels;
    std::optional<int> n_res_levels;
    std::optional<double> kappa_r;
    std::optional<double> atol;
    int m = 30;  // semiclassical level count
    double on_mult = 10.0;
    double off_mult = 10.0;
    FluxBranch branch = FluxBranch::upper_side;

    bool operator==(const SweepOverrides&) const = default;
};

struct SweepPlan {
    CircuitParams qubit;
    GridAxis axis = GridAxis::frequency;
    std::vector<double> grid;  // target omega10 in GHz, or phi_ext in rad
    std::vector<double> photon_grid;
    int init_state = 0;
    Backend backend = Backend::quantum;
    SweepOverrides overrides;

    void validate() const;
    [[nodiscard]] int rows() const { return static_cast<int>(grid.size()); }
    [[nodiscard]] int cols() const { return static_cast<int>(photon_grid.size()); }
    [[nodiscard]] int cells() const { return rows() * cols(); }

    // Sorted-key compact JSON; doubles in shortest round-trip form.
    [[nodiscard]] std::string canonical_json() const;
    static SweepPlan from_json(const std::string& text);
    // FNV-1a 64 of canonical_json()
    [[nodiscard]] std::uint64_t plan_id() const;
};

std::string plan_id_hex(std::uint64_t id);

enum class CellStatus : std::uint8_t { pending = 0, done = 1, failed = 2 };
std::string to_string(CellStatus s);

struct CellResult {
    CellStatus status = CellStatus::pending;
    double leakage = 0.0;
    double n_bar_achieved = 0.0;
    std::string message;
    // provenance, excluded from value comparison
    double runtime_s = 0.0;
    int worker = -1;

    [[nodiscard]] bool same_values(const CellResult& o) const;
};

struct LeakageMap {
    std::uint64_t plan_id = 0;
    SweepPlan plan;
    std::vector<CellResult> cells;  // row-major: grid index, then photon index

    [[nodiscard]] const CellResult& at(int row, int col) const { return cells.at(static_cast<std::size_t>(row * plan.cols() + col)); }
    [[nodiscard]] int count(CellStatus s) const;
    // values only; provenance ignored
    [[nodiscard]] bool same_values(const LeakageMap& o) const;
};

// One cell, no checkpointing. Exceptions are converted to a failed cell.
CellResult run_cell(const SweepPlan& plan, int index);

// Starts a fresh checkpoint at checkpoint_path (overwriting any existing file).
LeakageMap run_sweep(const SweepPlan& plan, int parallelism, const std::string& checkpoint_path);

// Re-runs pending and failed cells. Throws IntegrityError on a bad header or when
// expected is given and its plan id differs from the stored one.
LeakageMap resume_sweep(const std::string& checkpoint_path, int parallelism, const SweepPlan* expected = nullptr);

// Reads a checkpoint without running anything. Corrupt records are skipped.
LeakageMap read_checkpoint(const std::string& checkpoint_path);

enum class ExportFormat { csv, json, svg };
ExportFormat export_format_from_string(const std::string& s);

std::string map_to_csv(const LeakageMap& map);
std::string map_to_json(const LeakageMap& map);
std::string map_to_svg(const LeakageMap& map);
void export_map(const LeakageMap& map, const std::string& path, ExportFormat format);

struct CsvRow {
    double axis_value = 0.0;
    double n_bar = 0.0;
    double leakage = 0.0;
    std::string status;
};
std::vector<CsvRow> import_map_csv(const std::string& text);

}  // namespace mist
