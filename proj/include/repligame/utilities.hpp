#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "repligame/errors.hpp"
#include "repligame/grid.hpp"

namespace repligame {

/// Parameters of the energy game: production exponent alpha in (0,1), unit
/// cost sigma, congestion weight w, and the congestion threshold x_bar. An
/// opponent at or above x_bar (closed on the left) triggers the surcharge.
struct EnergyParams {
    double alpha = 0.5;
    double sigma = 1.25;
    double w = 1.25;
    double x_bar = 0.5;

    bool operator==(const EnergyParams&) const = default;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ValidationError("energy parameters violate 0 < alpha < 1");
        if (!(sigma > 0.0)) throw ValidationError("energy parameters violate sigma > 0");
        if (!(w >= 0.0)) throw ValidationError("energy parameters violate w >= 0");
        if (!(x_bar > 0.0 && x_bar <= 1.0))
            throw ValidationError("energy parameters violate 0 < x_bar <= 1");
    }
};

namespace detail {

// Analytic shortcut attached to a kernel by its factory. The tabulated
// product is always available; the structured forms evaluate the same sum in
// O(J) and are used when present.
enum class KernelForm { Tabulated, QuadraticGap, Congestion };

} // namespace detail

/// Pairwise utility kernel f(x_j, x_k), pre-tabulated on the grid nodes.
/// `bound` dominates |f| on the grid; `symmetric` records f(x,y) = f(y,x).
struct UtilityKernel {
    Array2d table;
    double bound = 0.0;
    bool symmetric = false;
    std::string label;

    // Factory-provided structure; Tabulated means plain mat-vec.
    detail::KernelForm form = detail::KernelForm::Tabulated;
    double gap_sign = 0.0;                  // QuadraticGap: f = gap_sign * (x-y)^2
    EnergyParams energy;                    // Congestion parameters
    std::vector<double> base_payoff;        // Congestion: x^alpha/alpha - sigma x
    std::vector<double> congestion_slope;   // Congestion: -sigma w x
};

/// f = -(x-y)^2 when concave, +(x-y)^2 otherwise. The continuum bound on
/// [0,1]^2 is 1, published as `bound`.
inline UtilityKernel make_potential_kernel(const GridSpec& grid, bool concave) {
    UtilityKernel k;
    const std::size_t n = grid.cells;
    const double sign = concave ? -1.0 : 1.0;
    k.table = Array2d(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t m = 0; m < n; ++m) {
            const double gap = grid.nodes[j] - grid.nodes[m];
            k.table(j, m) = sign * gap * gap;
        }
    k.bound = 1.0;
    k.symmetric = true;
    k.label = concave ? "potential_concave" : "potential_convex";
    k.form = detail::KernelForm::QuadraticGap;
    k.gap_sign = sign;
    return k;
}

/// f(x, y) = x^alpha / alpha - sigma x - sigma w x [y >= x_bar]. The bound is
/// the scanned table maximum.
inline UtilityKernel make_energy_kernel(const GridSpec& grid, const EnergyParams& params) {
    params.validate();
    UtilityKernel k;
    const std::size_t n = grid.cells;
    k.table = Array2d(n, n);
    k.base_payoff.resize(n);
    k.congestion_slope.resize(n);
    double bound = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double x = grid.nodes[j];
        k.base_payoff[j] = std::pow(x, params.alpha) / params.alpha - params.sigma * x;
        k.congestion_slope[j] = -params.sigma * params.w * x;
        for (std::size_t m = 0; m < n; ++m) {
            const double surcharge = (grid.nodes[m] >= params.x_bar) ? k.congestion_slope[j] : 0.0;
            const double f = k.base_payoff[j] + surcharge;
            k.table(j, m) = f;
            bound = std::max(bound, std::abs(f));
        }
    }
    k.bound = bound;
    k.symmetric = false;
    k.label = "energy";
    k.form = detail::KernelForm::Congestion;
    k.energy = params;
    return k;
}

/// Wrap an arbitrary table; the bound is scanned from the entries.
inline UtilityKernel make_table_kernel(const GridSpec& grid, Array2d table, std::string label) {
    if (table.rows() != grid.cells || table.cols() != grid.cells)
        throw DimensionMismatch("kernel table extents do not match the grid");
    UtilityKernel k;
    k.table = std::move(table);
    double bound = 0.0;
    bool symmetric = true;
    for (std::size_t j = 0; j < grid.cells; ++j)
        for (std::size_t m = 0; m < grid.cells; ++m) {
            bound = std::max(bound, std::abs(k.table(j, m)));
            symmetric = symmetric && k.table(j, m) == k.table(m, j);
        }
    k.bound = bound;
    k.symmetric = symmetric;
    k.label = std::move(label);
    return k;
}

/// Scanned max |f| over the table.
inline double utility_bound(const UtilityKernel& kernel) {
    double bound = 0.0;
    for (std::size_t j = 0; j < kernel.table.rows(); ++j)
        for (double v : kernel.table.row(j)) bound = std::max(bound, std::abs(v));
    return bound;
}

/// Mean-field utility U_j = dx * sum_k f(x_j, x_k) p_k, written into `u`.
/// Factory kernels carry their analytic structure, collapsing the product to
/// O(J); the result is the same sum either way.
inline void kernel_utility_into(const UtilityKernel& kernel, std::span<const double> p,
                                const GridSpec& grid, std::span<double> u) {
    const std::size_t n = grid.cells;
    if (p.size() != n || u.size() != n || kernel.table.cols() != n)
        throw DimensionMismatch("density length does not match the kernel grid");
    switch (kernel.form) {
        case detail::KernelForm::QuadraticGap: {
            double m0 = 0.0, m1 = 0.0, m2 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double x = grid.nodes[k];
                m0 += p[k];
                m1 += p[k] * x;
                m2 += p[k] * x * x;
            }
            m0 *= grid.dx;
            m1 *= grid.dx;
            m2 *= grid.dx;
            for (std::size_t j = 0; j < n; ++j) {
                const double x = grid.nodes[j];
                u[j] = kernel.gap_sign * (x * x * m0 - 2.0 * x * m1 + m2);
            }
            break;
        }
        case detail::KernelForm::Congestion: {
            double tail = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                if (grid.nodes[k] >= kernel.energy.x_bar) tail += p[k];
            tail *= grid.dx;
            for (std::size_t j = 0; j < n; ++j)
                u[j] = kernel.base_payoff[j] + kernel.congestion_slope[j] * tail;
            break;
        }
        case detail::KernelForm::Tabulated: {
            for (std::size_t j = 0; j < n; ++j) {
                const auto row = kernel.table.row(j);
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) acc += row[k] * p[k];
                u[j] = acc * grid.dx;
            }
            break;
        }
    }
}

inline std::vector<double> kernel_utility(const UtilityKernel& kernel,
                                          std::span<const double> p, const GridSpec& grid) {
    std::vector<double> u(grid.cells);
    kernel_utility_into(kernel, p, grid, u);
    return u;
}

/// Population average dx * sum_j u_j p_j.
inline double average_utility(std::span<const double> u, std::span<const double> p,
                              const GridSpec& grid) {
    if (u.size() != grid.cells || p.size() != grid.cells)
        throw DimensionMismatch("utility/density length does not match the grid");
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.cells; ++j) acc += u[j] * p[j];
    return acc * grid.dx;
}

/// Utilities at every time level of a density trajectory.
inline Array2d utilities_over(const UtilityKernel& kernel, const DensityTrajectory& traj,
                              const GridSpec& grid) {
    if (traj.values.cols() != grid.cells)
        throw DimensionMismatch("trajectory width does not match the grid");
    Array2d out(traj.values.rows(), traj.values.cols());
    for (std::size_t i = 0; i < traj.values.rows(); ++i) {
        const auto u = kernel_utility(kernel, traj.values.row(i), grid);
        for (std::size_t j = 0; j < grid.cells; ++j) out(i, j) = u[j];
    }
    return out;
}

/// Position of x_bar relative to the interior rest points.
enum class EnergyRegime {
    CongestedInterior,    // x_bar <= x_bar_2: the congested rest point is live
    ThresholdPinned,      // x_bar between the rest points: mass pins below x_bar
    UncongestedInterior,  // x_bar >= x_bar_1: the uncongested rest point is live
};

/// Rest points of the energy game and the utilities of the stable-candidate
/// strategies. Candidates are ordered [uncongested rest point x_bar_1,
/// congested rest point x_bar_2, threshold approached from below].
struct EnergyEquilibriumReport {
    double x_bar_1 = 0.0;
    double x_bar_2 = 0.0;
    EnergyRegime regime = EnergyRegime::ThresholdPinned;
    struct Candidate {
        double x;
        double utility;
    };
    std::array<Candidate, 3> candidates{};
};

inline EnergyEquilibriumReport energy_equilibrium_report(const EnergyParams& params) {
    params.validate();
    EnergyEquilibriumReport rep;
    const double expo = -1.0 / (1.0 - params.alpha);
    rep.x_bar_1 = std::pow(params.sigma, expo);
    rep.x_bar_2 = std::pow(params.sigma * (1.0 + params.w), expo);
    if (params.x_bar <= rep.x_bar_2)
        rep.regime = EnergyRegime::CongestedInterior;
    else if (params.x_bar >= rep.x_bar_1)
        rep.regime = EnergyRegime::UncongestedInterior;
    else
        rep.regime = EnergyRegime::ThresholdPinned;

    const auto plain = [&](double x) {
        return std::pow(x, params.alpha) / params.alpha - params.sigma * x;
    };
    const auto congested = [&](double x) {
        return std::pow(x, params.alpha) / params.alpha -
               params.sigma * (1.0 + params.w) * x;
    };
    // Each candidate is priced on its own branch: the uncongested rest point
    // and the from-below threshold strategy pay no surcharge, the congested
    // rest point pays it.
    rep.candidates[0] = {rep.x_bar_1, plain(rep.x_bar_1)};
    rep.candidates[1] = {rep.x_bar_2, congested(rep.x_bar_2)};
    rep.candidates[2] = {params.x_bar, plain(params.x_bar)};
    return rep;
}

} // namespace repligame
