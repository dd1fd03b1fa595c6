#pragma once

#include <cmath>
#include <cstdio>
#include <span>
#include <vector>

#include "repligame/detail/sweep.hpp"
#include "repligame/errors.hpp"
#include "repligame/grid.hpp"
#include "repligame/rates.hpp"
#include "repligame/utilities.hpp"

namespace repligame {

namespace detail {

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Time-step restriction for an explicit comparison step whose utilities are
// bounded by k: the per-cell relative change is below 1/2 in each direction.
inline void check_step_bound(const TransitionRateSpec& spec, double k, double dt,
                             const char* who) {
    const double gate = 2.0 * eval_rate(spec, 2.0 * k) * dt;
    if (!(gate < 1.0)) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "%s violates 2*C(2K)*dt < 1: 2*C(%.6g)*%.6g = %.6g with K = %.6g", who,
                      2.0 * k, dt, gate, k);
        throw StabilityViolation(msg);
    }
}

inline void grd_step_into(std::span<const double> p_prev, std::span<const double> u_prev,
                          const TransitionRateSpec& spec, const GridSpec& grid,
                          SweepWorkspace& ws, std::span<double> scratch,
                          std::span<double> out) {
    check_step_bound(spec, max_abs(u_prev), grid.dt, "comparison step");
    net_flow(spec, u_prev, p_prev, ws, scratch);
    const double step = grid.dt * grid.dx;
    for (std::size_t j = 0; j < grid.cells; ++j)
        out[j] = p_prev[j] * (1.0 + step * scratch[j]);
}

} // namespace detail

/// One explicit step of the pairwise-comparison flow: each pair of cells
/// exchanges mass at rate C(payoff gap), weighted by the opponent's density.
/// The update is multiplicative, so empty cells stay empty bit-exactly and
/// constant utilities are a fixed point.
inline std::vector<double> grd_step(std::span<const double> p_prev,
                                    std::span<const double> u_prev,
                                    const TransitionRateSpec& spec, const GridSpec& grid) {
    if (p_prev.size() != grid.cells || u_prev.size() != grid.cells)
        throw DimensionMismatch("step inputs do not match the grid width");
    detail::SweepWorkspace ws;
    std::vector<double> flow(grid.cells);
    std::vector<double> out(grid.cells);
    detail::grd_step_into(p_prev, u_prev, spec, grid, ws, flow, out);
    return out;
}

/// Forward solve of the comparison flow under mean-field utilities: level 0
/// is p0, each later level one grd_step with utilities from the previous
/// level's density.
inline DensityTrajectory grd_solve(const UtilityKernel& kernel, std::span<const double> p0,
                                   const TransitionRateSpec& spec, const GridSpec& grid) {
    if (p0.size() != grid.cells)
        throw DimensionMismatch("initial density does not match the grid width");
    for (double v : p0)
        if (!(v >= 0.0)) throw ValidationError("initial density violates p >= 0");
    if (std::abs(mass(p0, grid) - 1.0) > 1e-8)
        throw ValidationError("initial density violates unit mass");

    DensityTrajectory traj(grid);
    for (std::size_t j = 0; j < grid.cells; ++j) traj.values(0, j) = p0[j];

    detail::SweepWorkspace ws;
    std::vector<double> flow(grid.cells);
    for (std::size_t i = 1; i <= grid.time_steps; ++i) {
        const auto prev = traj.values.row(i - 1);
        const auto u = kernel_utility(kernel, prev, grid);
        detail::grd_step_into(prev, u, spec, grid, ws, flow, traj.values.row(i));
    }
    return traj;
}

} // namespace repligame
