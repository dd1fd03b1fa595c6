#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "repligame/detail/sweep.hpp"
#include "repligame/errors.hpp"
#include "repligame/grd.hpp"
#include "repligame/grid.hpp"
#include "repligame/rates.hpp"
#include "repligame/utilities.hpp"

namespace repligame {

/// Uniform bound on the value recursion: terminal gain stretched by the
/// running payoff bound K in either direction.
inline double value_bound(std::span<const double> psi, double k) {
    double hi = psi[0], lo = psi[0];
    for (double v : psi) {
        hi = std::max(hi, v);
        lo = std::min(lo, v);
    }
    return std::max(std::abs(hi + k), std::abs(lo - k));
}

/// Sufficient time-step conditions for the coupled scheme at value bound k2:
/// contraction of the backward recursion needs (delta + L) dt < 1 with L the
/// primitive's Lipschitz bound on the reachable range; positivity of the
/// forward flow needs 2 C(2 k2) dt < 1. Both are diagnostics; solvers gate on
/// weaker necessary conditions.
struct StabilityReport {
    double l_c = 0.0;
    bool prop2_ok = false;
    bool prop3_ok = false;
    double prop2_margin = 0.0;
    double prop3_margin = 0.0;
};

inline StabilityReport stability_report(double delta, const TransitionRateSpec& spec, double k2,
                                        double dt) {
    StabilityReport rep;
    rep.l_c = primitive_lipschitz_bound(spec, 3.0 * k2);
    rep.prop2_margin = 1.0 - (delta + rep.l_c) * dt;
    rep.prop2_ok = rep.prop2_margin > 0.0;
    rep.prop3_margin = 1.0 - 2.0 * eval_rate(spec, 2.0 * k2) * dt;
    rep.prop3_ok = rep.prop3_margin > 0.0;
    return rep;
}

/// Best-response switching rates for one value row: entry (j, k) is the rate
/// from cell j toward cell k, C(phi_k - phi_j).
inline Array2d optimal_rate_matrix(std::span<const double> phi_row,
                                   const TransitionRateSpec& spec) {
    const std::size_t n = phi_row.size();
    Array2d m(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            m(j, k) = eval_rate(spec, phi_row[k] - phi_row[j]);
    return m;
}

namespace detail {

inline void check_discount_step(double delta, double dt) {
    if (delta * dt > 1.0) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "backward recursion violates delta*dt <= 1: %.6g * %.6g = %.6g", delta, dt,
                      delta * dt);
        throw StabilityViolation(msg);
    }
}

inline void hjb_backward_into(const UtilityKernel& kernel, const Array2d& density,
                              std::span<const double> psi, double delta,
                              const TransitionRateSpec& spec, const GridSpec& grid,
                              SweepWorkspace& ws, std::span<double> gains,
                              std::span<double> urow, Array2d& phi) {
    const std::size_t last = grid.time_steps;
    const double keep = 1.0 - delta * grid.dt;
    const double dtdx = grid.dt * grid.dx;
    const double ddt = delta * grid.dt;
    std::copy(psi.begin(), psi.end(), phi.row(last).begin());
    for (std::size_t i = last; i-- > 0;) {
        const auto p_row = density.row(i);
        kernel_utility_into(kernel, p_row, grid, urow);
        gain_sum(spec, phi.row(i + 1), p_row, ws, gains);
        auto out = phi.row(i);
        const auto next = phi.row(i + 1);
        for (std::size_t j = 0; j < grid.cells; ++j)
            out[j] = keep * next[j] + dtdx * gains[j] + ddt * urow[j];
    }
}

inline void fp_forward_into(const Array2d& phi, std::span<const double> p0,
                            const TransitionRateSpec& spec, const GridSpec& grid,
                            SweepWorkspace& ws, std::span<double> flow, Array2d& density) {
    double sup = 0.0;
    for (std::size_t i = 0; i <= grid.time_steps; ++i)
        for (double v : phi.row(i)) sup = std::max(sup, std::abs(v));
    check_step_bound(spec, sup, grid.dt, "best-response step");

    const double dtdx = grid.dt * grid.dx;
    std::copy(p0.begin(), p0.end(), density.row(0).begin());
    for (std::size_t i = 1; i <= grid.time_steps; ++i) {
        const auto prev = density.row(i - 1);
        net_flow(spec, phi.row(i), prev, ws, flow);
        auto out = density.row(i);
        for (std::size_t j = 0; j < grid.cells; ++j)
            out[j] = prev[j] * (1.0 + dtdx * flow[j]);
    }
}

inline void validate_density(std::span<const double> p0, const GridSpec& grid) {
    if (p0.size() != grid.cells)
        throw DimensionMismatch("initial density does not match the grid width");
    for (double v : p0)
        if (!(v >= 0.0)) throw ValidationError("initial density violates p >= 0");
    if (std::abs(mass(p0, grid) - 1.0) > 1e-8)
        throw ValidationError("initial density violates unit mass");
}

} // namespace detail

/// Backward value recursion against a frozen density trajectory: each level
/// discounts the next one, adds the switching gain from every better cell,
/// and the running mean-field payoff at the current level.
inline ValueTrajectory hjb_backward(const UtilityKernel& kernel, const DensityTrajectory& density,
                                    std::span<const double> psi, double delta,
                                    const TransitionRateSpec& spec, const GridSpec& grid) {
    if (density.values.rows() != grid.time_steps + 1 || density.values.cols() != grid.cells ||
        psi.size() != grid.cells)
        throw DimensionMismatch("density trajectory or terminal value does not match the grid");
    detail::check_discount_step(delta, grid.dt);
    ValueTrajectory phi(grid);
    detail::SweepWorkspace ws;
    std::vector<double> gains(grid.cells), urow(grid.cells);
    detail::hjb_backward_into(kernel, density.values, psi, delta, spec, grid, ws, gains, urow,
                              phi.values);
    return phi;
}

/// Forward density flow along best-response rates read off a frozen value
/// trajectory. The step at level i uses the value row at level i; updates are
/// multiplicative, so support never grows.
inline DensityTrajectory fp_forward(const ValueTrajectory& phi, std::span<const double> p0,
                                    const TransitionRateSpec& spec, const GridSpec& grid) {
    if (phi.values.rows() != grid.time_steps + 1 || phi.values.cols() != grid.cells)
        throw DimensionMismatch("value trajectory does not match the grid");
    detail::validate_density(p0, grid);
    DensityTrajectory traj(grid);
    detail::SweepWorkspace ws;
    std::vector<double> flow(grid.cells);
    detail::fp_forward_into(phi.values, p0, spec, grid, ws, flow, traj.values);
    return traj;
}

struct FixedPointConfig {
    double relaxation = 0.25;
    std::size_t max_iters = 1000;
    double tol = 1e-9;
    double divergence_cap = 1e6;

    bool operator==(const FixedPointConfig&) const = default;

    void validate() const {
        if (!(relaxation > 0.0 && relaxation <= 1.0))
            throw ValidationError("fixed point violates 0 < relaxation <= 1");
        if (max_iters < 1) throw ValidationError("fixed point violates max_iters >= 1");
        if (!(tol > 0.0)) throw ValidationError("fixed point violates tol > 0");
        if (!(divergence_cap > 0.0))
            throw ValidationError("fixed point violates divergence_cap > 0");
    }
};

enum class SolveStatus { Converged, ConvergenceFailure };

struct MfgSolution {
    DensityTrajectory density;
    ValueTrajectory value;
    SolveStatus status = SolveStatus::ConvergenceFailure;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    double value_bound_k2 = 0.0;   // a-priori bound used for diagnostics
    StabilityReport stability;     // sufficient conditions at that bound
    std::string failure_reason;    // empty when converged
};

/// Damped fixed-point iteration coupling the backward and forward sweeps.
/// Starting from the time-constant extension of p0, each pass recomputes the
/// value against the current density, flows the density along it, and blends
/// the result in with the relaxation weight. Convergence failure is a status;
/// only malformed inputs and an overshooting discount step throw.
inline MfgSolution mfg_fixed_point(const UtilityKernel& kernel, std::span<const double> p0,
                                   std::span<const double> psi, double delta,
                                   const TransitionRateSpec& spec, const FixedPointConfig& cfg,
                                   const GridSpec& grid) {
    cfg.validate();
    if (!(delta > 0.0)) throw ValidationError("fixed point violates delta > 0");
    detail::validate_density(p0, grid);
    if (psi.size() != grid.cells)
        throw DimensionMismatch("terminal value does not match the grid width");
    detail::check_discount_step(delta, grid.dt);

    MfgSolution sol;
    sol.value_bound_k2 = value_bound(psi, kernel.bound);
    sol.stability = stability_report(delta, spec, sol.value_bound_k2, grid.dt);

    // Rates are held constant beyond 3x the value bound; the bound keeps every
    // reachable argument inside the untruncated region, so this only affects
    // stray iterates.
    TransitionRateSpec sspec = spec;
    if (!sspec.truncation && sol.value_bound_k2 > 0.0)
        sspec.truncation = 3.0 * sol.value_bound_k2;

    sol.density = DensityTrajectory(grid);
    sol.value = ValueTrajectory(grid);
    Array2d& p_cur = sol.density.values;
    for (std::size_t i = 0; i <= grid.time_steps; ++i)
        std::copy(p0.begin(), p0.end(), p_cur.row(i).begin());

    DensityTrajectory scratch_traj(grid);
    Array2d& p_new = scratch_traj.values;
    detail::SweepWorkspace hjb_ws, fp_ws;
    std::vector<double> gains(grid.cells), urow(grid.cells), flow(grid.cells);

    const double w = cfg.relaxation;
    for (std::size_t m = 1; m <= cfg.max_iters; ++m) {
        try {
            detail::hjb_backward_into(kernel, p_cur, psi, delta, sspec, grid, hjb_ws, gains,
                                      urow, sol.value.values);
            detail::fp_forward_into(sol.value.values, p0, sspec, grid, fp_ws, flow, p_new);
        } catch (const StabilityViolation& e) {
            sol.iterations = m;
            sol.status = SolveStatus::ConvergenceFailure;
            sol.failure_reason = e.what();
            return sol;
        }
        double resid = 0.0;
        double* cur = p_cur.data();
        const double* fresh = p_new.data();
        const std::size_t total = (grid.time_steps + 1) * grid.cells;
        for (std::size_t t = 0; t < total; ++t) {
            const double d = w * (fresh[t] - cur[t]);
            cur[t] += d;
            resid = std::max(resid, std::abs(d));
        }
        sol.iterations = m;
        sol.final_residual = resid;
        if (resid <= cfg.tol) {
            sol.status = SolveStatus::Converged;
            return sol;
        }
        if (!(resid <= cfg.divergence_cap)) {
            sol.status = SolveStatus::ConvergenceFailure;
            sol.failure_reason = "residual exceeded the divergence cap";
            return sol;
        }
    }
    sol.status = SolveStatus::ConvergenceFailure;
    sol.failure_reason = "iteration budget exhausted before the residual met tol";
    return sol;
}

} // namespace repligame
