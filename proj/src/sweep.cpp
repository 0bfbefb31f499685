#include "mist/sweep.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <json.hpp>

#include "mist/errors.hpp"
#include "mist/io.hpp"
#include "mist/quantum_sim.hpp"
#include "mist/semiclassical.hpp"

namespace mist {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

std::string to_string(Backend b) {
    switch (b) {
        case Backend::quantum:
            return "quantum";
        case Backend::semiclassical_simple:
            return "semiclassical-simple";
        case Backend::semiclassical_renormalized:
            return "semiclassical-renormalized";
    }
    return "?";
}

Backend backend_from_string(const std::string& s) {
    if (s == "quantum") return Backend::quantum;
    if (s == "semiclassical-simple" || s == "simple") return Backend::semiclassical_simple;
    if (s == "semiclassical-renormalized" || s == "renormalized") return Backend::semiclassical_renormalized;
    throw ValidationError("unknown backend '" + s + "'");
}

std::string to_string(CellStatus s) {
    switch (s) {
        case CellStatus::pending:
            return "pending";
        case CellStatus::done:
            return "done";
        case CellStatus::failed:
            return "failed";
    }
    return "?";
}

namespace {

void check_monotone(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw ValidationError(std::string(what) + " grid is empty");
    for (double x : v)
        if (!std::isfinite(x)) throw ValidationError(std::string(what) + " grid has a non-finite value");
    if (v.size() < 2) return;
    const bool up = v[1] > v[0];
    for (std::size_t i = 1; i < v.size(); ++i)
        if (up ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1]))
            throw ValidationError(std::string(what) + " grid must be strictly monotone");
}

}  // namespace

void SweepPlan::validate() const {
    qubit.validate();
    check_monotone(grid, "frequency");
    check_monotone(photon_grid, "photon");
    for (double n : photon_grid)
        if (n < 0.0) throw ValidationError("photon numbers must be >= 0");
    if (init_state != 0 && init_state != 1) throw ValidationError("init_state must be 0 or 1");
    if (backend != Backend::quantum && overrides.m < 2) throw ValidationError("semiclassical M must be >= 2");
}

std::string SweepPlan::canonical_json() const {
    nlohmann::json j;
    j["qubit"] = {{"e_c_ghz", qubit.e_c},         {"e_j_ghz", qubit.e_j}, {"e_l_ghz", qubit.e_l},
                  {"omega_r_ghz", qubit.omega_r}, {"k_eff", qubit.k_eff}, {"kappa_r_ghz", qubit.kappa_r},
                  {"phi_ext_rad", qubit.phi_ext}};
    j["axis"] = axis == GridAxis::frequency ? "frequency" : "phi";
    j["grid"] = grid;
    j["photon_grid"] = photon_grid;
    j["init_state"] = init_state;
    j["backend"] = to_string(backend);
    nlohmann::json o;
    o["n_ist_levels"] = overrides.n_ist_levels ? nlohmann::json(*overrides.n_ist_levels) : nlohmann::json(nullptr);
    o["n_res_levels"] = overrides.n_res_levels ? nlohmann::json(*overrides.n_res_levels) : nlohmann::json(nullptr);
    o["kappa_r_ghz"] = overrides.kappa_r ? nlohmann::json(*overrides.kappa_r) : nlohmann::json(nullptr);
    o["atol"] = overrides.atol ? nlohmann::json(*overrides.atol) : nlohmann::json(nullptr);
    o["m"] = overrides.m;
    o["on_mult"] = overrides.on_mult;
    o["off_mult"] = overrides.off_mult;
    o["branch"] = overrides.branch == FluxBranch::upper_side ? "upper" : "lower";
    j["overrides"] = o;
    return j.dump();
}

SweepPlan SweepPlan::from_json(const std::string& text) {
    SweepPlan p;
    try {
        const auto j = nlohmann::json::parse(text);
        const auto& q = j.at("qubit");
        p.qubit = {q.at("e_c_ghz"),     q.at("e_j_ghz"),     q.at("e_l_ghz"),    q.at("omega_r_ghz"),
                   q.at("k_eff"),       q.at("kappa_r_ghz"), q.at("phi_ext_rad")};
        const std::string axis = j.at("axis");
        if (axis != "frequency" && axis != "phi") throw ValidationError("plan axis must be frequency or phi");
        p.axis = axis == "frequency" ? GridAxis::frequency : GridAxis::phi;
        p.grid = j.at("grid").get<std::vector<double>>();
        p.photon_grid = j.at("photon_grid").get<std::vector<double>>();
        p.init_state = j.at("init_state");
        p.backend = backend_from_string(j.at("backend"));
        const auto& o = j.at("overrides");
        if (!o.at("n_ist_levels").is_null()) p.overrides.n_ist_levels = o.at("n_ist_levels").get<int>();
        if (!o.at("n_res_levels").is_null()) p.overrides.n_res_levels = o.at("n_res_levels").get<int>();
        if (!o.at("kappa_r_ghz").is_null()) p.overrides.kappa_r = o.at("kappa_r_ghz").get<double>();
        if (!o.at("atol").is_null()) p.overrides.atol = o.at("atol").get<double>();
        p.overrides.m = o.at("m");
        p.overrides.on_mult = o.at("on_mult");
        p.overrides.off_mult = o.at("off_mult");
        p.overrides.branch = o.at("branch") == "lower" ? FluxBranch::lower_side : FluxBranch::upper_side;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed sweep plan: ") + e.what());
    }
    p.validate();
    return p;
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t SweepPlan::plan_id() const { return fnv1a64(canonical_json()); }

std::string plan_id_hex(std::uint64_t id) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << id;
    return os.str();
}

bool CellResult::same_values(const CellResult& o) const {
    // bitwise on doubles so -0.0/0.0 and NaN payloads count as differences
    return status == o.status && std::memcmp(&leakage, &o.leakage, sizeof leakage) == 0 &&
           std::memcmp(&n_bar_achieved, &o.n_bar_achieved, sizeof n_bar_achieved) == 0 && message == o.message;
}

int LeakageMap::count(CellStatus s) const {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(), [s](const CellResult& c) { return c.status == s; }));
}

bool LeakageMap::same_values(const LeakageMap& o) const {
    if (plan_id != o.plan_id || cells.size() != o.cells.size()) return false;
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (!cells[i].same_values(o.cells[i])) return false;
    return true;
}

CellResult run_cell(const SweepPlan& plan, int index) {
    const auto start = std::chrono::steady_clock::now();
    CellResult c;
    try {
        const int row = index / plan.cols(), col = index % plan.cols();
        const double phi = plan.axis == GridAxis::phi
                               ? plan.grid[row]
                               : flux_for_frequency(plan.qubit, plan.grid[row], plan.overrides.branch);
        const CircuitParams q = plan.qubit.at_flux(phi);
        const double n_bar = plan.photon_grid[col];
        MistResult r;
        if (plan.backend == Backend::quantum) {
            QuantumOptions o;
            o.n_ist_levels = plan.overrides.n_ist_levels;
            o.n_res_levels = plan.overrides.n_res_levels;
            o.kappa_r = plan.overrides.kappa_r;
            o.on_mult = plan.overrides.on_mult;
            o.off_mult = plan.overrides.off_mult;
            if (plan.overrides.atol) o.lindblad.atol = *plan.overrides.atol;
            r = mist_quantum(q, n_bar, plan.init_state, o);
        } else {
            SemiclassicalOptions o;
            o.m = plan.overrides.m;
            o.kappa_r = plan.overrides.kappa_r;
            o.on_mult = plan.overrides.on_mult;
            o.off_mult = plan.overrides.off_mult;
            if (plan.overrides.atol) o.atol = *plan.overrides.atol;
            const auto model = plan.backend == Backend::semiclassical_simple ? SemiclassicalModel::simple
                                                                              : SemiclassicalModel::renormalized;
            r = mist_semiclassical(q, n_bar, plan.init_state, model, o);
        }
        c.status = CellStatus::done;
        c.leakage = r.leakage;
        c.n_bar_achieved = r.n_bar_achieved;
    } catch (const std::exception& e) {
        c.status = CellStatus::failed;
        c.message = e.what();
    } catch (...) {
        c.status = CellStatus::failed;
        c.message = "unknown failure";
    }
    c.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return c;
}

// Checkpoint layout, all integers little-endian:
//   "MISTCKP1" | u64 plan id | u32 plan length | plan json | u32 crc32(plan json)
//   then records: u32 length | payload | u32 crc32(payload)
//   payload: u32 cell | u8 status | f64 leakage | f64 n_bar_achieved | f64 runtime_s | i32 worker |
//            u32 message length | message
namespace {

constexpr char magic[8] = {'M', 'I', 'S', 'T', 'C', 'K', 'P', '1'};
constexpr std::uint32_t max_record = 1u << 20;

template <class T>
void put(std::string& out, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

template <class T>
bool get(std::string_view& in, T& v) {
    if (in.size() < sizeof(T)) return false;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return true;
}

std::uint32_t crc(std::string_view s) {
    return static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

std::string encode_header(const SweepPlan& plan) {
    const std::string js = plan.canonical_json();
    std::string out(magic, sizeof magic);
    put<std::uint64_t>(out, plan.plan_id());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(js.size()));
    out += js;
    put<std::uint32_t>(out, crc(js));
    return out;
}

std::string encode_record(int index, const CellResult& c) {
    std::string p;
    put<std::uint32_t>(p, static_cast<std::uint32_t>(index));
    put<std::uint8_t>(p, static_cast<std::uint8_t>(c.status));
    put<double>(p, c.leakage);
    put<double>(p, c.n_bar_achieved);
    put<double>(p, c.runtime_s);
    put<std::int32_t>(p, c.worker);
    put<std::uint32_t>(p, static_cast<std::uint32_t>(c.message.size()));
    p += c.message;
    std::string out;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.size()));
    out += p;
    put<std::uint32_t>(out, crc(p));
    return out;
}

bool decode_payload(std::string_view p, int cells, int& index, CellResult& c) {
    std::uint32_t idx = 0, mlen = 0;
    std::uint8_t st = 0;
    std::int32_t worker = 0;
    if (!get(p, idx) || !get(p, st) || !get(p, c.leakage) || !get(p, c.n_bar_achieved) || !get(p, c.runtime_s) ||
        !get(p, worker) || !get(p, mlen))
        return false;
    if (p.size() != mlen || idx >= static_cast<std::uint32_t>(cells) || st > 2) return false;
    c.message.assign(p.data(), mlen);
    c.status = static_cast<CellStatus>(st);
    c.worker = worker;
    index = static_cast<int>(idx);
    return true;
}

struct Loaded {
    LeakageMap map;
    std::size_t valid_end = 0;  // byte offset after the last record that parsed cleanly
    int corrupt_records = 0;
};

Loaded load(const std::string& path) {
    const std::string data = read_file(path);
    std::string_view in(data);
    if (in.size() < sizeof magic || std::memcmp(in.data(), magic, sizeof magic) != 0)
        throw IntegrityError("checkpoint " + path + " has no valid header");
    in.remove_prefix(sizeof magic);
    std::uint64_t id = 0;
    std::uint32_t len = 0, plan_crc = 0;
    if (!get(in, id) || !get(in, len) || in.size() < len) throw IntegrityError("checkpoint header is truncated");
    const std::string_view js = in.substr(0, len);
    in.remove_prefix(len);
    if (!get(in, plan_crc) || plan_crc != crc(js)) throw IntegrityError("checkpoint plan checksum mismatch");
    Loaded out;
    try {
        out.map.plan = SweepPlan::from_json(std::string(js));
    } catch (const ValidationError& e) {
        throw IntegrityError(std::string("checkpoint plan unreadable: ") + e.what());
    }
    if (out.map.plan.plan_id() != id) throw IntegrityError("checkpoint plan hash does not match its plan");
    out.map.plan_id = id;
    out.map.cells.assign(static_cast<std::size_t>(out.map.plan.cells()), CellResult{});
    out.valid_end = data.size() - in.size();

    while (!in.empty()) {
        std::uint32_t rlen = 0, rcrc = 0;
        std::string_view probe = in;
        if (!get(probe, rlen) || rlen > max_record || probe.size() < rlen + 4u) break;  // torn tail
        const std::string_view payload = probe.substr(0, rlen);
        probe.remove_prefix(rlen);
        get(probe, rcrc);
        in = probe;
        int index = -1;
        CellResult c;
        if (rcrc != crc(payload) || !decode_payload(payload, out.map.plan.cells(), index, c)) {
            ++out.corrupt_records;
        } else {
            out.map.cells[static_cast<std::size_t>(index)] = c;
        }
        out.valid_end = data.size() - in.size();
    }
    return out;
}

class CheckpointWriter {
public:
    CheckpointWriter(const std::string& path, bool fresh, std::size_t keep_bytes) : path_(path) {
        const int flags = O_WRONLY | O_CREAT | (fresh ? O_TRUNC : 0);
        fd_ = ::open(path.c_str(), flags, 0644);
        if (fd_ < 0) throw IoError("cannot open checkpoint " + path + ": " + std::strerror(errno));
        if (!fresh) {
            // drop a torn tail before appending
            if (::ftruncate(fd_, static_cast<off_t>(keep_bytes)) != 0 || ::lseek(fd_, 0, SEEK_END) < 0) {
                ::close(fd_);
                throw IoError("cannot prepare checkpoint " + path + " for append");
            }
        }
    }
    CheckpointWriter(const CheckpointWriter&) = delete;
    CheckpointWriter& operator=(const CheckpointWriter&) = delete;
    ~CheckpointWriter() {
        if (fd_ >= 0) ::close(fd_);
    }

    void write(std::string_view bytes) {
        while (!bytes.empty()) {
            const ssize_t n = ::write(fd_, bytes.data(), bytes.size());
            if (n < 0) {
                if (errno == EINTR) continue;
                throw IoError("checkpoint write failed for " + path_ + ": " + std::strerror(errno));
            }
            bytes.remove_prefix(static_cast<std::size_t>(n));
        }
        ::fdatasync(fd_);
    }

private:
    std::string path_;
    int fd_ = -1;
};

void execute(LeakageMap& map, int parallelism, CheckpointWriter& writer) {
    const SweepPlan& plan = map.plan;
    std::vector<int> todo;
    for (int i = 0; i < plan.cells(); ++i)
        if (map.cells[static_cast<std::size_t>(i)].status != CellStatus::done) todo.push_back(i);
    if (todo.empty()) return;
    const int workers = std::max(1, std::min(parallelism, static_cast<int>(todo.size())));

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<int, CellResult>> finished;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= todo.size()) break;
                CellResult c = run_cell(plan, todo[k]);
                c.worker = w;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    finished.emplace_back(todo[k], std::move(c));
                }
                cv.notify_one();
            }
        });
    }
    // this thread is the single checkpoint writer
    std::size_t written = 0;
    std::exception_ptr io_failure;
    while (written < todo.size()) {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return !finished.empty(); });
        auto [index, cell] = std::move(finished.front());
        finished.pop_front();
        lock.unlock();
        if (!io_failure) {
            try {
                writer.write(encode_record(index, cell));
            } catch (...) {
                io_failure = std::current_exception();
                next.store(todo.size());
            }
        }
        map.cells[static_cast<std::size_t>(index)] = std::move(cell);
        ++written;
        if (io_failure && next.load() >= todo.size()) {
            // drain whatever is still running
            for (auto& t : pool) t.join();
            pool.clear();
            break;
        }
    }
    for (auto& t : pool) t.join();
    if (io_failure) std::rethrow_exception(io_failure);
}

}  // namespace

LeakageMap run_sweep(const SweepPlan& plan, int parallelism, const std::string& checkpoint_path) {
    plan.validate();
    LeakageMap map;
    map.plan = plan;
    map.plan_id = plan.plan_id();
    map.cells.assign(static_cast<std::size_t>(plan.cells()), CellResult{});
    CheckpointWriter writer(checkpoint_path, true, 0);
    writer.write(encode_header(plan));
    execute(map, parallelism, writer);
    return map;
}

LeakageMap read_checkpoint(const std::string& checkpoint_path) { return load(checkpoint_path).map; }

LeakageMap resume_sweep(const std::string& checkpoint_path, int parallelism, const SweepPlan* expected) {
    Loaded l = load(checkpoint_path);
    if (expected && expected->plan_id() != l.map.plan_id)
        throw IntegrityError("checkpoint plan " + plan_id_hex(l.map.plan_id) + " does not match the supplied plan " +
                             plan_id_hex(expected->plan_id()));
    if (l.map.count(CellStatus::done) == l.map.plan.cells()) return l.map;
    CheckpointWriter writer(checkpoint_path, false, l.valid_end);
    execute(l.map, parallelism, writer);
    return l.map;
}

ExportFormat export_format_from_string(const std::string& s) {
    if (s == "csv") return ExportFormat::csv;
    if (s == "json") return ExportFormat::json;
    if (s == "svg" || s == "svg-heatmap") return ExportFormat::svg;
    throw ValidationError("unknown export format '" + s + "' (expected csv, json or svg)");
}

namespace {

const char* axis_column(const SweepPlan& p) { return p.axis == GridAxis::frequency ? "frequency_ghz" : "phi_ext_rad"; }

}  // namespace

std::string map_to_csv(const LeakageMap& map) {
    std::ostringstream os;
    os << "# " << version_stamp() << " plan " << plan_id_hex(map.plan_id) << "\n";
    os << axis_column(map.plan) << ",n_bar,leakage,status\n";
    for (int r = 0; r < map.plan.rows(); ++r)
        for (int c = 0; c < map.plan.cols(); ++c) {
            const CellResult& cell = map.at(r, c);
            os << format_double(map.plan.grid[r]) << ',' << format_double(map.plan.photon_grid[c]) << ','
               << (cell.status == CellStatus::done ? format_double(cell.leakage) : std::string("nan")) << ','
               << to_string(cell.status) << '\n';
        }
    return os.str();
}

std::vector<CsvRow> import_map_csv(const std::string& text) {
    std::vector<CsvRow> rows;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        std::stringstream ls(line);
        std::string a, n, l, s;
        if (!std::getline(ls, a, ',') || !std::getline(ls, n, ',') || !std::getline(ls, l, ',') || !std::getline(ls, s))
            throw ValidationError("malformed leakage csv row: " + line);
        CsvRow r;
        r.axis_value = std::stod(a);
        r.n_bar = std::stod(n);
        r.leakage = l == "nan" ? NAN : std::stod(l);
        r.status = s;
        rows.push_back(r);
    }
    return rows;
}

std::string map_to_json(const LeakageMap& map) {
    nlohmann::ordered_json j;
    j["version"] = MIST_VERSION;
    j["plan_id"] = plan_id_hex(map.plan_id);
    j["plan"] = nlohmann::ordered_json::parse(map.plan.canonical_json());
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (int r = 0; r < map.plan.rows(); ++r)
        for (int c = 0; c < map.plan.cols(); ++c) {
            const CellResult& cell = map.at(r, c);
            nlohmann::ordered_json x;
            x["row"] = r;
            x["col"] = c;
            x["status"] = to_string(cell.status);
            if (cell.status == CellStatus::done) {
                x["leakage"] = cell.leakage;
                x["n_bar_achieved"] = cell.n_bar_achieved;
            }
            if (!cell.message.empty()) x["message"] = cell.message;
            x["provenance"] = {{"runtime_s", cell.runtime_s}, {"worker", cell.worker}};
            cells.push_back(x);
        }
    j["cells"] = cells;
    return j.dump(2);
}

std::string map_to_svg(const LeakageMap& map) {
    constexpr int cell = 24, margin = 40;
    const int cols = map.plan.rows();  // frequency along x
    const int rows = map.plan.cols();  // photons along y
    const int w = margin + cols * cell + 10, h = margin + rows * cell + 10;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<!-- " << version_stamp() << " plan " << plan_id_hex(map.plan_id) << " -->\n";
    os << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
          "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#ddd\"/>"
          "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#c00\" stroke-width=\"2\"/></pattern></defs>\n";
    for (int x = 0; x < cols; ++x)
        for (int y = 0; y < rows; ++y) {
            const CellResult& c = map.at(x, y);
            const int px = margin + x * cell;
            const int py = margin + (rows - 1 - y) * cell;  // photons increase upward
            std::string fill;
            if (c.status == CellStatus::failed) {
                fill = "url(#hatch)";
            } else if (c.status == CellStatus::pending) {
                fill = "#888888";
            } else {
                // log color scale over [1e-9, 1]
                const double t = std::clamp((std::log10(std::max(c.leakage, 1e-9)) + 9.0) / 9.0, 0.0, 1.0);
                const int r = static_cast<int>(std::lround(68 + t * (253 - 68)));
                const int g = static_cast<int>(std::lround(1 + t * (231 - 1)));
                const int b = static_cast<int>(std::lround(84 + t * (37 - 84)));
                std::ostringstream f;
                f << '#' << std::hex << std::setfill('0') << std::setw(2) << r << std::setw(2) << g << std::setw(2) << b;
                fill = f.str();
            }
            os << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"" << fill << "\"/>\n";
        }
    os << "<text x=\"" << margin << "\" y=\"20\" font-size=\"12\">" << axis_column(map.plan)
       << " (x) vs n_bar (y), log10 leakage</text>\n";
    os << "</svg>\n";
    return os.str();
}

void export_map(const LeakageMap& map, const std::string& path, ExportFormat format) {
    if (map.count(CellStatus::done) < 1) throw ValidationError("map has no completed cells to export");
    switch (format) {
        case ExportFormat::csv:
            write_file_atomic(path, map_to_csv(map));
            break;
        case ExportFormat::json:
            write_file_atomic(path, map_to_json(map));
            break;
        case ExportFormat::svg:
            write_file_atomic(path, map_to_svg(map));
            break;
    }
}

}  // namespace mist
