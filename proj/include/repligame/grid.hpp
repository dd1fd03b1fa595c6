#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "repligame/errors.hpp"

namespace repligame {

/// Uniform cell-centered discretization of [0, 1] x [0, T]: cells of width
/// dx = 1/J with nodes x_j = (j - 1/2) dx, time levels t_i = i dt, dt = T/I.
struct GridSpec {
    std::size_t time_steps = 0;  // I
    std::size_t cells = 0;       // J
    double horizon = 0.0;        // T
    double dt = 0.0;
    double dx = 0.0;
    std::vector<double> nodes;   // cell centers, ascending

    bool same_layout(const GridSpec& o) const {
        return time_steps == o.time_steps && cells == o.cells && horizon == o.horizon;
    }
};

inline GridSpec build_grid(std::size_t time_steps, std::size_t cells, double horizon) {
    if (time_steps < 1) throw ValidationError("grid violates I >= 1");
    if (cells < 1) throw ValidationError("grid violates J >= 1");
    if (!(horizon > 0.0)) throw ValidationError("grid violates T > 0");
    GridSpec g;
    g.time_steps = time_steps;
    g.cells = cells;
    g.horizon = horizon;
    g.dt = horizon / static_cast<double>(time_steps);
    g.dx = 1.0 / static_cast<double>(cells);
    g.nodes.resize(cells);
    // Fill the lower half and mirror the rest so x_j + x_{J+1-j} == 1 holds
    // bit-exactly, which downstream symmetry checks rely on.
    for (std::size_t j = 0; j < cells / 2; ++j)
        g.nodes[j] = (static_cast<double>(j) + 0.5) * g.dx;
    if (cells % 2 == 1) g.nodes[cells / 2] = 0.5;
    for (std::size_t j = cells - cells / 2; j < cells; ++j)
        g.nodes[j] = 1.0 - g.nodes[cells - 1 - j];
    return g;
}

enum class InitialDensityKind { Uniform, FiniteSupport };

enum class TerminalValueKind { Zero, LinearGain };

/// Cell mass functional dx * sum_j p_j.
inline double mass(std::span<const double> p, const GridSpec& grid) {
    double s = 0.0;
    for (double v : p) s += v;
    return s * grid.dx;
}

/// Initial density on the grid nodes, normalized to unit mass. FiniteSupport
/// is flat on x <= 3/5 and zero beyond.
inline std::vector<double> initial_density(InitialDensityKind kind, const GridSpec& grid) {
    std::vector<double> p(grid.cells, 1.0);
    if (kind == InitialDensityKind::FiniteSupport) {
        for (std::size_t j = 0; j < grid.cells; ++j)
            if (grid.nodes[j] > 0.6) p[j] = 0.0;
    }
    const double m = mass(p, grid);
    if (!(m > 0.0)) throw ValidationError("initial density violates positive mass");
    for (auto& v : p) v /= m;
    return p;
}

/// Terminal value profile: identically zero, or the decreasing linear gain
/// psi_bar * (1 - x).
inline std::vector<double> terminal_value(TerminalValueKind kind, double psi_bar,
                                          const GridSpec& grid) {
    std::vector<double> psi(grid.cells, 0.0);
    if (kind == TerminalValueKind::LinearGain) {
        if (!(psi_bar >= 0.0)) throw ValidationError("terminal gain violates psi_bar >= 0");
        for (std::size_t j = 0; j < grid.cells; ++j) psi[j] = psi_bar * (1.0 - grid.nodes[j]);
    }
    return psi;
}

/// Dense row-major (rows x cols) table of reals.
class Array2d {
public:
    Array2d() = default;
    Array2d(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {v_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {v_.data() + i * cols_, cols_}; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

/// Density p(t_i, x_j) over all I+1 time levels; row i is the level-i slice.
struct DensityTrajectory {
    Array2d values;
    DensityTrajectory() = default;
    explicit DensityTrajectory(const GridSpec& g) : values(g.time_steps + 1, g.cells) {}
};

/// Value function Phi(t_i, x_j) over all I+1 time levels.
struct ValueTrajectory {
    Array2d values;
    ValueTrajectory() = default;
    explicit ValueTrajectory(const GridSpec& g) : values(g.time_steps + 1, g.cells) {}
};

} // namespace repligame
