#pragma once

// Shared helpers for the test suite: fixed-seed generators so property tests
// are reproducible, plus small numeric oracles (quadrature, bisection) kept
// independent of the library's closed forms.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace support {

inline std::mt19937_64 engine(std::uint64_t salt) {
    return std::mt19937_64{0x5eed0123456789abULL ^ salt};
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline int uniform_int(std::mt19937_64& g, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(g);
}

// Random density on a J-cell grid with unit mass (dx * sum p = 1).
inline std::vector<double> random_density(std::mt19937_64& g, std::size_t cells, double dx) {
    std::vector<double> p(cells);
    double mass = 0.0;
    for (auto& v : p) {
        v = uniform(g, 0.0, 1.0);
        mass += v * dx;
    }
    for (auto& v : p) v /= mass;
    return p;
}

// Composite Simpson rule; n is halved-interval count (even panels).
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
    if (n % 2 != 0) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
    return acc * h / 3.0;
}

// Bisection for monotone f on [lo, hi] with f(lo) <= target <= f(hi).
inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi,
                     int iters = 200) {
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Brute-force maximum of g over {0, step, 2*step, ..., hi}; returns {max, argmax}.
struct GridMax {
    double value;
    double arg;
};
inline GridMax grid_maximize(const std::function<double(double)>& g, double hi, double step) {
    GridMax best{g(0.0), 0.0};
    const long n = static_cast<long>(hi / step);
    for (long i = 1; i <= n; ++i) {
        const double u = i * step;
        const double v = g(u);
        if (v > best.value) best = {v, u};
    }
    return best;
}

} // namespace support
