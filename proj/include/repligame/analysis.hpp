#pragma once

// Experiment harness on top of the solvers: half-time error metrics between
// the replicator run and the control solution, decade convergence rates,
// discount sweeps, grid-refinement ladders, and long-run replicator
// diagnostics for the energy game.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "repligame/grd.hpp"
#include "repligame/mfg.hpp"

namespace repligame {

struct MidtimeErrors {
    SolveStatus status = SolveStatus::Converged;
    double err_density = std::numeric_limits<double>::quiet_NaN();
    double err_value = std::numeric_limits<double>::quiet_NaN();
};

/// Sup-norm gaps at t = T/2: replicator density against control density and
/// realized utility against the value function. A failed control solve passes
/// through with its status and NaN gaps. Comparison needs an even step count
/// so the half time sits on a grid level.
inline MidtimeErrors midtime_errors(const DensityTrajectory& grd, const Array2d& grd_utilities,
                                    const MfgSolution& mfg, const GridSpec& grid) {
    if (grid.time_steps % 2 != 0)
        throw ValidationError("half-time comparison violates even time_steps");
    const std::size_t levels = grid.time_steps + 1;
    const auto matches = [&](const Array2d& a) {
        return a.rows() == levels && a.cols() == grid.cells;
    };
    if (!matches(grd.values) || !matches(grd_utilities) || !matches(mfg.density.values) ||
        !matches(mfg.value.values))
        throw Incomparable("trajectories live on different grids");

    MidtimeErrors out;
    out.status = mfg.status;
    if (mfg.status != SolveStatus::Converged) return out;

    const std::size_t mid = grid.time_steps / 2;
    double ed = 0.0, ev = 0.0;
    for (std::size_t j = 0; j < grid.cells; ++j) {
        ed = std::max(ed, std::abs(grd.values(mid, j) - mfg.density.values(mid, j)));
        ev = std::max(ev, std::abs(grd_utilities(mid, j) - mfg.value.values(mid, j)));
    }
    out.err_density = ed;
    out.err_value = ev;
    return out;
}

namespace detail {

/// Log-ratio chain between consecutive error entries. Entries that are
/// absent, nonpositive, or nonfinite break the chain on both sides.
inline std::vector<std::optional<double>> ratio_rates(
    const std::vector<std::optional<double>>& errs, double log_base) {
    std::vector<std::optional<double>> out(errs.empty() ? 0 : errs.size() - 1);
    for (std::size_t m = 1; m < errs.size(); ++m) {
        const auto& a = errs[m - 1];
        const auto& b = errs[m];
        if (a && b && *a > 0.0 && *b > 0.0 && std::isfinite(*a) && std::isfinite(*b))
            out[m - 1] = std::log(*a / *b) / log_base;
    }
    return out;
}

} // namespace detail

/// Observed order against a decade ladder of discount rates: entry m is
/// log10(err_m / err_{m+1}). Failed entries leave gaps in the chain.
inline std::vector<std::optional<double>> convergence_rates(
    const std::vector<std::optional<double>>& errs) {
    return detail::ratio_rates(errs, std::log(10.0));
}

struct SweepScenario {
    UtilityKernel kernel;
    TransitionRateSpec rate = TransitionRateSpec::make(RateFamily::Power, 1.0);
    std::vector<double> p0;
    std::vector<double> psi;
    GridSpec grid;
    std::vector<double> deltas;
    FixedPointConfig fixed_point{};
};

struct SweepRow {
    double delta = 0.0;
    SolveStatus status = SolveStatus::ConvergenceFailure;
    std::optional<double> err_density;
    std::optional<double> err_value;
    std::optional<double> cr_density;
    std::optional<double> cr_value;
    std::size_t iterations = 0;
    double runtime_seconds = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    DensityTrajectory grd;
    Array2d grd_utilities;
    std::vector<MfgSolution> solutions;  // row-aligned control solves
    double grd_runtime_seconds = 0.0;
};

/// One replicator run plus one control solve per discount rate, reported in
/// ascending delta order with decade rates chained over the converged rows.
/// A solve whose discount step is rejected up front is recorded as a failed
/// row (reason kept on its solution) instead of aborting the sweep. Rows are
/// independent; `threads` of them run concurrently.
inline SweepReport delta_sweep(const SweepScenario& scenario, std::size_t threads = 1) {
    if (threads < 1) throw ValidationError("sweep violates threads >= 1");
    if (scenario.deltas.empty()) throw ValidationError("sweep violates nonempty deltas");
    if (scenario.grid.time_steps % 2 != 0)
        throw ValidationError("half-time comparison violates even time_steps");
    std::vector<double> deltas = scenario.deltas;
    std::sort(deltas.begin(), deltas.end());
    for (std::size_t m = 0; m < deltas.size(); ++m) {
        if (!(deltas[m] > 0.0)) throw ValidationError("sweep violates delta > 0");
        if (m > 0 && deltas[m] == deltas[m - 1])
            throw ValidationError("sweep violates distinct deltas");
    }

    using clock = std::chrono::steady_clock;
    SweepReport report;
    const auto grd_start = clock::now();
    report.grd = grd_solve(scenario.kernel, scenario.p0, scenario.rate, scenario.grid);
    report.grd_utilities = utilities_over(scenario.kernel, report.grd, scenario.grid);
    report.grd_runtime_seconds = std::chrono::duration<double>(clock::now() - grd_start).count();

    const std::size_t n = deltas.size();
    report.rows.resize(n);
    report.solutions.resize(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n) break;
            auto& row = report.rows[k];
            row.delta = deltas[k];
            const auto start = clock::now();
            try {
                report.solutions[k] =
                    mfg_fixed_point(scenario.kernel, scenario.p0, scenario.psi, deltas[k],
                                    scenario.rate, scenario.fixed_point, scenario.grid);
            } catch (const StabilityViolation& e) {
                report.solutions[k].status = SolveStatus::ConvergenceFailure;
                report.solutions[k].failure_reason = e.what();
            }
            row.runtime_seconds = std::chrono::duration<double>(clock::now() - start).count();
            row.status = report.solutions[k].status;
            row.iterations = report.solutions[k].iterations;
            if (row.status == SolveStatus::Converged) {
                const auto errs = midtime_errors(report.grd, report.grd_utilities,
                                                 report.solutions[k], scenario.grid);
                row.err_density = errs.err_density;
                row.err_value = errs.err_value;
            }
        }
    };
    if (threads == 1 || n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const std::size_t spawned = std::min(threads, n) - 1;
        pool.reserve(spawned);
        for (std::size_t t = 0; t < spawned; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
    }

    std::vector<std::optional<double>> ed(n), ev(n);
    for (std::size_t k = 0; k < n; ++k) {
        ed[k] = report.rows[k].err_density;
        ev[k] = report.rows[k].err_value;
    }
    const auto crd = convergence_rates(ed);
    const auto crv = convergence_rates(ev);
    for (std::size_t k = 1; k < n; ++k) {
        report.rows[k].cr_density = crd[k - 1];
        report.rows[k].cr_value = crv[k - 1];
    }
    return report;
}

/// Field of a nested finer grid read at each coarse cell center. The center
/// sits on the shared face of the two middle fine cells of the coarse cell,
/// so their average is the center value (exact for linear fields).
inline std::vector<double> center_restrict(std::span<const double> fine, std::size_t ratio) {
    if (ratio == 0 || (ratio & (ratio - 1)) != 0)
        throw ValidationError("restriction violates power-of-two ratio");
    if (fine.empty() || fine.size() % ratio != 0)
        throw ValidationError("restriction violates nested layout");
    if (ratio == 1) return {fine.begin(), fine.end()};
    const std::size_t coarse = fine.size() / ratio;
    std::vector<double> out(coarse);
    for (std::size_t j = 0; j < coarse; ++j)
        out[j] = 0.5 * (fine[ratio * j + ratio / 2 - 1] + fine[ratio * j + ratio / 2]);
    return out;
}

struct RefinementScenario {
    std::function<UtilityKernel(const GridSpec&)> kernel_factory;
    TransitionRateSpec rate = TransitionRateSpec::make(RateFamily::Power, 1.0);
    InitialDensityKind init = InitialDensityKind::Uniform;
    TerminalValueKind terminal = TerminalValueKind::Zero;
    double psi_bar = 0.0;
    std::size_t base_time_steps = 0;
    std::size_t base_cells = 0;
    double horizon = 0.0;
    FixedPointConfig fixed_point{};
};

struct RefinementRow {
    double delta = 0.0;
    std::size_t level = 0;
    std::size_t time_steps = 0;
    std::size_t cells = 0;
    SolveStatus status = SolveStatus::ConvergenceFailure;
    std::optional<double> err_density;  // absent on the reference level and failures
    std::optional<double> cr_density;   // dyadic rate against the previous level
    std::size_t iterations = 0;
    double runtime_seconds = 0.0;
};

struct RefinementReport {
    std::size_t levels = 0;
    std::vector<RefinementRow> rows;  // sorted by delta, then level
};

/// Control solves on a dyadic ladder of grids, each compared at t = T/2
/// against the finest level restricted to its layout. Rates between
/// consecutive levels are log2 ratios, mirroring the step-halving.
inline RefinementReport refinement_study(const RefinementScenario& scenario,
                                         std::size_t n_levels,
                                         const std::vector<double>& deltas) {
    if (n_levels < 3) throw ValidationError("refinement violates n_levels >= 3");
    if (!scenario.kernel_factory) throw ValidationError("refinement violates kernel factory");
    if (scenario.base_time_steps % 2 != 0)
        throw ValidationError("half-time comparison violates even time_steps");
    if (deltas.empty()) throw ValidationError("refinement violates nonempty deltas");
    std::vector<double> sorted = deltas;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t m = 0; m < sorted.size(); ++m) {
        if (!(sorted[m] > 0.0)) throw ValidationError("refinement violates delta > 0");
        if (m > 0 && sorted[m] == sorted[m - 1])
            throw ValidationError("refinement violates distinct deltas");
    }

    using clock = std::chrono::steady_clock;
    RefinementReport report;
    report.levels = n_levels;
    for (const double delta : sorted) {
        std::vector<RefinementRow> ladder(n_levels);
        std::vector<std::vector<double>> mid_rows(n_levels);
        for (std::size_t level = 1; level <= n_levels; ++level) {
            auto& row = ladder[level - 1];
            row.delta = delta;
            row.level = level;
            row.time_steps = scenario.base_time_steps << (level - 1);
            row.cells = scenario.base_cells << (level - 1);
            const auto grid = build_grid(row.time_steps, row.cells, scenario.horizon);
            const auto kernel = scenario.kernel_factory(grid);
            const auto p0 = initial_density(scenario.init, grid);
            const auto psi = terminal_value(scenario.terminal, scenario.psi_bar, grid);
            const auto start = clock::now();
            MfgSolution sol;
            try {
                sol = mfg_fixed_point(kernel, p0, psi, delta, scenario.rate,
                                      scenario.fixed_point, grid);
            } catch (const StabilityViolation&) {
                sol.status = SolveStatus::ConvergenceFailure;
            }
            row.runtime_seconds = std::chrono::duration<double>(clock::now() - start).count();
            row.status = sol.status;
            row.iterations = sol.iterations;
            if (sol.status == SolveStatus::Converged) {
                const auto mid = sol.density.values.row(row.time_steps / 2);
                mid_rows[level - 1].assign(mid.begin(), mid.end());
            }
        }

        const bool have_reference = !mid_rows[n_levels - 1].empty();
        std::vector<std::optional<double>> errs(n_levels);
        for (std::size_t level = 1; level < n_levels; ++level) {
            if (!have_reference || mid_rows[level - 1].empty()) continue;
            const std::size_t ratio = std::size_t{1} << (n_levels - level);
            const auto restricted = center_restrict(mid_rows[n_levels - 1], ratio);
            double err = 0.0;
            for (std::size_t j = 0; j < restricted.size(); ++j)
                err = std::max(err, std::abs(mid_rows[level - 1][j] - restricted[j]));
            errs[level - 1] = err;
            ladder[level - 1].err_density = err;
        }
        const auto rates = detail::ratio_rates(errs, std::log(2.0));
        for (std::size_t level = 2; level <= n_levels; ++level)
            ladder[level - 1].cr_density = rates[level - 2];
        for (auto& row : ladder) report.rows.push_back(std::move(row));
    }
    return report;
}

struct LongrunRow {
    double x_bar = 0.0;
    double time = 0.0;
    double avg_utility = 0.0;
};

/// Classical replicator (power family, unit shape) for the energy game on
/// the fixed long-run layout dt = 0.1, dx = 0.01, recording the population
/// average utility at the requested times for each congestion threshold.
inline std::vector<LongrunRow> longrun_replicator(const EnergyParams& base,
                                                  const std::vector<double>& x_bars,
                                                  const std::vector<double>& times) {
    if (x_bars.empty()) throw ValidationError("long run violates nonempty thresholds");
    if (times.empty()) throw ValidationError("long run violates nonempty times");
    constexpr double dt = 0.1;
    constexpr std::size_t cells = 100;
    std::vector<std::size_t> steps(times.size());
    for (std::size_t m = 0; m < times.size(); ++m) {
        const double t = times[m];
        if (!(t >= 0.0)) throw ValidationError("long run violates time >= 0");
        if (m > 0 && !(t > times[m - 1]))
            throw ValidationError("long run violates ascending times");
        const double k = std::round(t / dt);
        if (std::abs(t - k * dt) > 1e-9 * std::max(1.0, t))
            throw ValidationError("long run violates times on the dt = 0.1 ladder");
        steps[m] = static_cast<std::size_t>(k);
    }

    const std::size_t last = std::max<std::size_t>(steps.back(), 1);
    const auto grid = build_grid(last, cells, dt * static_cast<double>(last));
    const auto spec = TransitionRateSpec::make(RateFamily::Power, 1.0);
    const auto p0 = initial_density(InitialDensityKind::Uniform, grid);

    std::vector<LongrunRow> rows;
    rows.reserve(x_bars.size() * times.size());
    for (const double x_bar : x_bars) {
        EnergyParams params = base;
        params.x_bar = x_bar;
        const auto kernel = make_energy_kernel(grid, params);
        const auto traj = grd_solve(kernel, p0, spec, grid);
        for (std::size_t m = 0; m < times.size(); ++m) {
            const auto p = traj.values.row(steps[m]);
            const auto u = kernel_utility(kernel, p, grid);
            rows.push_back({x_bar, times[m], average_utility(u, p, grid)});
        }
    }
    return rows;
}

} // namespace repligame
