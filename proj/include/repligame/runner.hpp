#pragma once

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "repligame/analysis.hpp"
#include "repligame/config.hpp"

namespace repligame {

inline constexpr std::string_view kVersion = "1.0.0";

/// Worker-pool width for sweep rows: REPLIGAME_THREADS when set (positive
/// integer; empty counts as unset), otherwise whatever parallelism the host
/// reports.
inline std::size_t resolve_thread_count() {
    const char* env = std::getenv("REPLIGAME_THREADS");
    if (env == nullptr || *env == '\0') {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? hw : 1;
    }
    const std::string v(env);
    if (v.find_first_not_of("0123456789") != std::string::npos)
        throw ValidationError("REPLIGAME_THREADS violates positive integer: '" + v + "'");
    errno = 0;
    const unsigned long long n = std::strtoull(v.c_str(), nullptr, 10);
    if (errno == ERANGE || n == 0)
        throw ValidationError("REPLIGAME_THREADS violates positive integer: '" + v + "'");
    return static_cast<std::size_t>(n);
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Single flat JSON object, assembled key by key and emitted verbatim.
class FlatJson {
public:
    void put(std::string_view key, std::string_view value) { add(key, quote(value)); }
    void put_number(std::string_view key, double v) { add(key, format_number(v)); }
    void put_count(std::string_view key, std::size_t v) { add(key, std::to_string(v)); }

    std::string str() const { return "{\n" + body_ + "\n}\n"; }

private:
    static std::string quote(std::string_view s) {
        std::string out = "\"";
        for (const char c : s) {
            switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
                    out += buf;
                } else {
                    out += c;
                }
            }
        }
        out += '"';
        return out;
    }

    void add(std::string_view key, const std::string& rendered) {
        if (!body_.empty()) body_ += ",\n";
        body_ += "  ";
        body_ += quote(key);
        body_ += ": ";
        body_ += rendered;
    }

    std::string body_;
};

inline const char* status_token(SolveStatus s) {
    return s == SolveStatus::Converged ? "converged" : "CF";
}

/// Error column: full-precision value, the CF literal on failed rows, blank
/// when genuinely undefined (reference level of a refinement ladder).
inline std::string error_field(const std::optional<double>& v, SolveStatus s) {
    if (s != SolveStatus::Converged) return "CF";
    return v ? format_number(*v) : std::string();
}

inline std::string rate_field(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string();
}

inline std::size_t snapshot_row(const GridSpec& grid, int level) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(grid.time_steps) * level / 4.0));
}

inline UtilityKernel config_kernel(const ScenarioConfig& cfg, const GridSpec& grid) {
    switch (cfg.kernel) {
    case KernelKind::PotentialConcave: return make_potential_kernel(grid, true);
    case KernelKind::PotentialConvex: return make_potential_kernel(grid, false);
    case KernelKind::Energy: return make_energy_kernel(grid, cfg.energy);
    case KernelKind::Zero: break;
    }
    return make_table_kernel(grid, Array2d(grid.cells, grid.cells, 0.0), "zero");
}

/// Quarter-time snapshot pair density_t{k}.csv / value_t{k}.csv for
/// k = 0..4. Control columns appear only when a solution is supplied; failed
/// solves still carry their last iterate, which is worth plotting.
inline void write_snapshots(const std::filesystem::path& dir, const GridSpec& grid,
                            const DensityTrajectory& grd, const Array2d& grd_utilities,
                            const MfgSolution* mfg) {
    for (int level = 0; level <= 4; ++level) {
        const std::size_t i = snapshot_row(grid, level);
        std::string density = mfg ? "x,p_grd,p_mfg\n" : "x,p_grd\n";
        std::string value = mfg ? "x,u_grd,phi_mfg\n" : "x,u_grd\n";
        for (std::size_t j = 0; j < grid.cells; ++j) {
            const std::string x = format_number(grid.nodes[j]);
            density += x;
            density += ',';
            density += format_number(grd.values(i, j));
            value += x;
            value += ',';
            value += format_number(grd_utilities(i, j));
            if (mfg != nullptr) {
                density += ',';
                density += format_number(mfg->density.values(i, j));
                value += ',';
                value += format_number(mfg->value.values(i, j));
            }
            density += '\n';
            value += '\n';
        }
        const std::string tag = std::to_string(level);
        write_text_file(dir / ("density_t" + tag + ".csv"), density);
        write_text_file(dir / ("value_t" + tag + ".csv"), value);
    }
}

inline constexpr std::string_view kSweepHeader =
    "delta,err_density,cr_density,err_value,cr_value,status,iterations,runtime_s";

inline std::string sweep_row_line(const SweepRow& row) {
    std::string line = format_number(row.delta);
    line += ',';
    line += error_field(row.err_density, row.status);
    line += ',';
    line += rate_field(row.cr_density);
    line += ',';
    line += error_field(row.err_value, row.status);
    line += ',';
    line += rate_field(row.cr_value);
    line += ',';
    line += status_token(row.status);
    line += ',';
    line += std::to_string(row.iterations);
    line += ',';
    line += format_number(row.runtime_seconds);
    return line;
}

inline std::string delta_dir_name(double delta) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "delta_%g", delta);
    return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline int run_grd(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                   FlatJson& meta) {
    const auto grid = build_grid(cfg.time_steps, cfg.cells, cfg.horizon);
    const auto kernel = config_kernel(cfg, grid);
    const auto rate = TransitionRateSpec::make(cfg.rate_family, cfg.rate_shape);
    const auto p0 = initial_density(cfg.init, grid);

    const auto start = std::chrono::steady_clock::now();
    const auto traj = grd_solve(kernel, p0, rate, grid);
    const auto utilities = utilities_over(kernel, traj, grid);
    meta.put_number("grd_runtime_seconds", seconds_since(start));

    write_snapshots(dir, grid, traj, utilities, nullptr);
    std::string report = "t,mass,avg_utility\n";
    for (int level = 0; level <= 4; ++level) {
        const std::size_t i = snapshot_row(grid, level);
        report += format_number(grid.dt * static_cast<double>(i));
        report += ',';
        report += format_number(mass(traj.values.row(i), grid));
        report += ',';
        report += format_number(average_utility(utilities.row(i), traj.values.row(i), grid));
        report += '\n';
    }
    write_text_file(dir / "report.csv", report);
    return 0;
}

/// Single control solve next to its decoupled baseline. Stability violations
/// propagate: for one named delta they are a configuration error, not a row
/// outcome.
inline int run_mfg(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                   FlatJson& meta) {
    const auto grid = build_grid(cfg.time_steps, cfg.cells, cfg.horizon);
    const auto kernel = config_kernel(cfg, grid);
    const auto rate = TransitionRateSpec::make(cfg.rate_family, cfg.rate_shape);
    const auto p0 = initial_density(cfg.init, grid);
    const auto psi = terminal_value(cfg.terminal, cfg.psi_bar, grid);

    auto start = std::chrono::steady_clock::now();
    const auto traj = grd_solve(kernel, p0, rate, grid);
    const auto utilities = utilities_over(kernel, traj, grid);
    meta.put_number("grd_runtime_seconds", seconds_since(start));

    start = std::chrono::steady_clock::now();
    const auto sol = mfg_fixed_point(kernel, p0, psi, cfg.mfg_delta, rate,
                                     cfg.fixed_point, grid);
    SweepRow row;
    row.delta = cfg.mfg_delta;
    row.status = sol.status;
    row.iterations = sol.iterations;
    row.runtime_seconds = seconds_since(start);
    if (sol.status == SolveStatus::Converged) {
        const auto errs = midtime_errors(traj, utilities, sol, grid);
        row.err_density = errs.err_density;
        row.err_value = errs.err_value;
    }
    write_text_file(dir / "report.csv",
                    std::string(kSweepHeader) + '\n' + sweep_row_line(row) + '\n');
    write_snapshots(dir, grid, traj, utilities, &sol);

    meta.put("status", status_token(sol.status));
    meta.put_count("iterations", sol.iterations);
    meta.put_number("final_residual", sol.final_residual);
    if (!sol.failure_reason.empty()) meta.put("failure_reason", sol.failure_reason);
    return sol.status == SolveStatus::Converged ? 0 : 2;
}

inline int run_sweep(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                     FlatJson& meta, std::size_t threads) {
    const auto grid = build_grid(cfg.time_steps, cfg.cells, cfg.horizon);
    SweepScenario scenario;
    scenario.kernel = config_kernel(cfg, grid);
    scenario.rate = TransitionRateSpec::make(cfg.rate_family, cfg.rate_shape);
    scenario.p0 = initial_density(cfg.init, grid);
    scenario.psi = terminal_value(cfg.terminal, cfg.psi_bar, grid);
    scenario.grid = grid;
    scenario.deltas = cfg.deltas;
    scenario.fixed_point = cfg.fixed_point;
    const auto report = delta_sweep(scenario, threads);

    std::string csv(kSweepHeader);
    csv += '\n';
    std::size_t failed = 0;
    for (const auto& row : report.rows) {
        csv += sweep_row_line(row);
        csv += '\n';
        if (row.status != SolveStatus::Converged) ++failed;
    }
    write_text_file(dir / "report.csv", csv);

    for (std::size_t m = 0; m < report.rows.size(); ++m) {
        const auto& sol = report.solutions[m];
        if (sol.density.values.rows() == 0) continue;  // solve rejected up front
        const auto sub = dir / delta_dir_name(report.rows[m].delta);
        std::filesystem::create_directories(sub);
        write_snapshots(sub, grid, report.grd, report.grd_utilities, &sol);
    }

    meta.put_number("grd_runtime_seconds", report.grd_runtime_seconds);
    meta.put_count("rows", report.rows.size());
    meta.put_count("cf_rows", failed);
    return failed > 0 ? 2 : 0;
}

inline int run_refinement(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                          FlatJson& meta) {
    RefinementScenario scenario;
    scenario.kernel_factory = [&cfg](const GridSpec& g) { return config_kernel(cfg, g); };
    scenario.rate = TransitionRateSpec::make(cfg.rate_family, cfg.rate_shape);
    scenario.init = cfg.init;
    scenario.terminal = cfg.terminal;
    scenario.psi_bar = cfg.psi_bar;
    scenario.base_time_steps = cfg.time_steps;
    scenario.base_cells = cfg.cells;
    scenario.horizon = cfg.horizon;
    scenario.fixed_point = cfg.fixed_point;
    const auto report = refinement_study(scenario, cfg.refinement_levels, cfg.deltas);

    std::string csv =
        "delta,level,time_steps,cells,err_density,cr_density,status,iterations,runtime_s\n";
    std::size_t failed = 0;
    for (const auto& row : report.rows) {
        csv += format_number(row.delta);
        csv += ',';
        csv += std::to_string(row.level);
        csv += ',';
        csv += std::to_string(row.time_steps);
        csv += ',';
        csv += std::to_string(row.cells);
        csv += ',';
        csv += error_field(row.err_density, row.status);
        csv += ',';
        csv += rate_field(row.cr_density);
        csv += ',';
        csv += status_token(row.status);
        csv += ',';
        csv += std::to_string(row.iterations);
        csv += ',';
        csv += format_number(row.runtime_seconds);
        csv += '\n';
        if (row.status != SolveStatus::Converged) ++failed;
    }
    write_text_file(dir / "report.csv", csv);
    meta.put_count("levels", report.levels);
    meta.put_count("cf_rows", failed);
    return failed > 0 ? 2 : 0;
}

inline int run_longrun(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                       FlatJson& meta) {
    const auto rows = longrun_replicator(cfg.energy, cfg.longrun_x_bars, cfg.longrun_times);
    std::string csv = "x_bar,t,avg_utility\n";
    for (const auto& row : rows) {
        csv += format_number(row.x_bar);
        csv += ',';
        csv += format_number(row.time);
        csv += ',';
        csv += format_number(row.avg_utility);
        csv += '\n';
    }
    write_text_file(dir / "report.csv", csv);
    meta.put_count("rows", rows.size());
    return 0;
}

inline constexpr Token<EnergyRegime> kRegimes[] = {
    {"congested_interior", EnergyRegime::CongestedInterior},
    {"threshold_pinned", EnergyRegime::ThresholdPinned},
    {"uncongested_interior", EnergyRegime::UncongestedInterior},
};

inline int run_equilibrium(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                           FlatJson& meta) {
    const auto report = energy_equilibrium_report(cfg.energy);
    std::string csv = "x_bar,x_bar_1,x_bar_2,regime,x_1,u_1,x_2,u_2,x_3,u_3\n";
    csv += format_number(cfg.energy.x_bar);
    csv += ',';
    csv += format_number(report.x_bar_1);
    csv += ',';
    csv += format_number(report.x_bar_2);
    csv += ',';
    csv += token_name(kRegimes, report.regime);
    for (const auto& candidate : report.candidates) {
        csv += ',';
        csv += format_number(candidate.x);
        csv += ',';
        csv += format_number(candidate.utility);
    }
    csv += '\n';
    write_text_file(dir / "report.csv", csv);
    std::printf("x_bar_1 = %.6g\nx_bar_2 = %.6g\nregime = %s\n", report.x_bar_1,
                report.x_bar_2, std::string(token_name(kRegimes, report.regime)).c_str());
    meta.put("regime", token_name(kRegimes, report.regime));
    meta.put_number("x_bar_1", report.x_bar_1);
    meta.put_number("x_bar_2", report.x_bar_2);
    return 0;
}

} // namespace detail

/// Runs the configured experiment, writing all artifacts under
/// cfg.output_path. Returns the process exit status: 0 on full success, 2
/// when any solve ended in convergence failure (the run still completes).
/// Hard errors (bad config, stability violations outside sweep rows, I/O)
/// surface as exceptions for the caller to map to exit 1.
inline int run_experiment(const ScenarioConfig& cfg, std::size_t threads) {
    validate_config(cfg);
    if (threads < 1) throw ValidationError("runner violates threads >= 1");
    const auto start = std::chrono::steady_clock::now();
    const std::filesystem::path dir(cfg.output_path);
    std::filesystem::create_directories(dir);

    detail::FlatJson meta;
    meta.put("library_version", kVersion);
    meta.put("compiler", __VERSION__);
    meta.put("experiment", detail::token_name(detail::kExperiments, cfg.experiment));
    meta.put("output_path", cfg.output_path);
    meta.put_count("threads", threads);
    meta.put_count("grid_time_steps", cfg.time_steps);
    meta.put_count("grid_cells", cfg.cells);
    meta.put_number("grid_horizon", cfg.horizon);
    meta.put_number("grid_dt", cfg.horizon / static_cast<double>(cfg.time_steps));
    meta.put_number("grid_dx", 1.0 / static_cast<double>(cfg.cells));

    int code = 0;
    switch (cfg.experiment) {
    case ExperimentKind::Grd: code = detail::run_grd(cfg, dir, meta); break;
    case ExperimentKind::Mfg: code = detail::run_mfg(cfg, dir, meta); break;
    case ExperimentKind::DeltaSweep: code = detail::run_sweep(cfg, dir, meta, threads); break;
    case ExperimentKind::Refinement: code = detail::run_refinement(cfg, dir, meta); break;
    case ExperimentKind::Longrun: code = detail::run_longrun(cfg, dir, meta); break;
    case ExperimentKind::Equilibrium: code = detail::run_equilibrium(cfg, dir, meta); break;
    }

    meta.put_number("runtime_seconds", detail::seconds_since(start));
    meta.put_count("exit_code", static_cast<std::size_t>(code));
    meta.put("config", render_config(cfg));
    detail::write_text_file(dir / "run.json", meta.str());
    return code;
}

inline int run_experiment(const ScenarioConfig& cfg) {
    return run_experiment(cfg, resolve_thread_count());
}

} // namespace repligame
