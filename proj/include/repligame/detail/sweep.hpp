#pragma once

// Row kernels shared by the forward (comparison / best-response flow) and
// backward (value coupling) sweeps:
//
//   net_flow: G_j = sum_k w_k [ C(v_j - v_k) - C(v_k - v_j) ]
//   gain_sum: S_j = sum_k w_k P( (v_k - v_j)_+ )
//
// The naive forms are O(J^2) per row. For the power family with integer
// shape and both exponential families the sums split over a sorted copy of
// the row into prefix/suffix moment or exponential sums, giving O(J log J)
// worst case and O(J) when consecutive rows are nearly sorted (the warm
// permutation is kept in the workspace). The split is exact algebra, not an
// approximation; ties are excluded from both sides so zero differences
// contribute exactly nothing and constant rows short-circuit to zero.
// Logarithmic and fractional-shape power rates, and rows where a truncation
// level could bind, take the direct pairwise path instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "repligame/rates.hpp"

namespace repligame::detail {

struct SweepWorkspace {
    std::vector<std::uint32_t> perm;   // warm sort order, kept across rows
    std::vector<std::uint32_t> where;  // inverse of perm
    std::vector<std::uint32_t> lo, hi; // tie-group bounds per sorted position
    std::vector<double> val, wt;       // row values (recentered) and weights, sorted
    std::vector<double> ep, em;        // exp(+q val), exp(-q val), sorted
    // Running sums indexed by sorted position; [k] holds the sum over
    // positions < k (prefix) or >= k (suffix).
    std::vector<double> pre[5], suf[5];

    void ensure(std::size_t n) {
        if (perm.size() != n) {
            perm.resize(n);
            for (std::size_t s = 0; s < n; ++s) perm[s] = static_cast<std::uint32_t>(s);
        }
        where.resize(n);
        lo.resize(n);
        hi.resize(n);
        val.resize(n);
        wt.resize(n);
        ep.resize(n);
        em.resize(n);
        for (auto* a : {pre, suf})
            for (int d = 0; d < 5; ++d) a[d].resize(n + 1);
    }
};

// Insertion sort of ws.perm by values[]; adaptive, stable, so nearly sorted
// rows cost O(n) and tie order never depends on the comparison.
inline void warm_sort(std::span<const double> values, SweepWorkspace& ws) {
    auto& perm = ws.perm;
    const std::size_t n = perm.size();
    for (std::size_t s = 1; s < n; ++s) {
        const std::uint32_t moving = perm[s];
        const double v = values[moving];
        std::size_t t = s;
        while (t > 0 && values[perm[t - 1]] > v) {
            perm[t] = perm[t - 1];
            --t;
        }
        perm[t] = moving;
    }
}

// Sort, recenter, gather weights, and mark tie groups. Returns the half
// spread of the row; a zero spread means the row is constant.
inline double prepare_row(std::span<const double> values, std::span<const double> weights,
                          SweepWorkspace& ws) {
    const std::size_t n = values.size();
    ws.ensure(n);
    warm_sort(values, ws);
    const double mid =
        0.5 * (values[ws.perm[0]] + values[ws.perm[n - 1]]);
    for (std::size_t s = 0; s < n; ++s) {
        const std::uint32_t j = ws.perm[s];
        ws.where[j] = static_cast<std::uint32_t>(s);
        ws.val[s] = values[j] - mid;
        ws.wt[s] = weights[j];
    }
    for (std::size_t s = 0; s < n; ++s)
        ws.lo[s] = (s > 0 && ws.val[s] == ws.val[s - 1]) ? ws.lo[s - 1]
                                                         : static_cast<std::uint32_t>(s);
    for (std::size_t s = n; s-- > 0;)
        ws.hi[s] = (s + 1 < n && ws.val[s] == ws.val[s + 1]) ? ws.hi[s + 1]
                                                             : static_cast<std::uint32_t>(s + 1);
    return values[ws.perm[n - 1]] - values[ws.perm[0]];
}

// Accumulate prefix/suffix sums of wt * val^d for d < count.
inline void moment_sums(SweepWorkspace& ws, int count) {
    const std::size_t n = ws.val.size();
    for (int d = 0; d < count; ++d) ws.pre[d][0] = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double term = ws.wt[s];
        for (int d = 0; d < count; ++d) {
            ws.pre[d][s + 1] = ws.pre[d][s] + term;
            term *= ws.val[s];
        }
    }
    for (int d = 0; d < count; ++d) ws.suf[d][n] = 0.0;
    for (std::size_t s = n; s-- > 0;) {
        double term = ws.wt[s];
        for (int d = 0; d < count; ++d) {
            ws.suf[d][s] = ws.suf[d][s + 1] + term;
            term *= ws.val[s];
        }
    }
}

// Accumulate prefix/suffix sums of wt * e^{-+ q val} (pre[1]: e^{-q v},
// suf[1]: e^{+q v}, and the mirrored pair in slot 2), plus plain weight and
// wt * val sums in slots 0 and 3.
inline void exp_sums(SweepWorkspace& ws, double q) {
    const std::size_t n = ws.val.size();
    for (std::size_t s = 0; s < n; ++s) {
        ws.ep[s] = std::exp(q * ws.val[s]);
        ws.em[s] = 1.0 / ws.ep[s];
    }
    ws.pre[0][0] = ws.pre[1][0] = ws.pre[2][0] = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        ws.pre[0][s + 1] = ws.pre[0][s] + ws.wt[s];
        ws.pre[1][s + 1] = ws.pre[1][s] + ws.wt[s] * ws.em[s];
        ws.pre[2][s + 1] = ws.pre[2][s] + ws.wt[s] * ws.ep[s];
    }
    ws.suf[0][n] = ws.suf[1][n] = ws.suf[2][n] = ws.suf[3][n] = 0.0;
    for (std::size_t s = n; s-- > 0;) {
        ws.suf[0][s] = ws.suf[0][s + 1] + ws.wt[s];
        ws.suf[1][s] = ws.suf[1][s + 1] + ws.wt[s] * ws.ep[s];
        ws.suf[2][s] = ws.suf[2][s + 1] + ws.wt[s] * ws.em[s];
        ws.suf[3][s] = ws.suf[3][s + 1] + ws.wt[s] * ws.val[s];
    }
}

inline bool integer_shape(double q) { return q == 1.0 || q == 2.0 || q == 3.0; }

// True when the row can use a split evaluation: no truncation in play, and
// either an integer-shape power rate or an exponential rate whose range will
// not overflow.
inline bool splittable(const TransitionRateSpec& spec, double spread) {
    if (spec.truncation && spread > *spec.truncation) return false;
    switch (spec.family) {
        case RateFamily::Power: return integer_shape(spec.shape);
        case RateFamily::PositiveExponential:
        case RateFamily::NegativeExponential: return spec.shape * spread < 300.0;
        case RateFamily::Logarithmic: return false;
    }
    return false;
}

inline void net_flow_direct(const TransitionRateSpec& spec, std::span<const double> values,
                            std::span<const double> weights, std::span<double> out) {
    const std::size_t n = values.size();
    for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
    for (std::size_t a = 1; a < n; ++a)
        for (std::size_t b = 0; b < a; ++b) {
            const double d = values[a] - values[b];
            if (d > 0.0) {
                const double c = eval_rate(spec, d);
                out[a] += weights[b] * c;
                out[b] -= weights[a] * c;
            } else if (d < 0.0) {
                const double c = eval_rate(spec, -d);
                out[b] += weights[a] * c;
                out[a] -= weights[b] * c;
            }
        }
}

/// G_j = sum_k w_k [C(v_j - v_k) - C(v_k - v_j)].
inline void net_flow(const TransitionRateSpec& spec, std::span<const double> values,
                     std::span<const double> weights, SweepWorkspace& ws,
                     std::span<double> out) {
    const std::size_t n = values.size();
    const double q = spec.shape;

    // The linear rate needs no sort: both directions fuse to v_j - v_k.
    if (spec.family == RateFamily::Power && q == 1.0 && !spec.truncation) {
        double vmin = values[0], vmax = values[0];
        for (double v : values) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        if (vmin == vmax) {
            for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
            return;
        }
        const double mid = 0.5 * (vmin + vmax);
        double wsum = 0.0, wvsum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            wsum += weights[k];
            wvsum += weights[k] * (values[k] - mid);
        }
        for (std::size_t j = 0; j < n; ++j) out[j] = (values[j] - mid) * wsum - wvsum;
        return;
    }

    const double spread = prepare_row(values, weights, ws);
    if (spread == 0.0) {
        for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
        return;
    }
    if (!splittable(spec, spread)) {
        net_flow_direct(spec, values, weights, out);
        return;
    }

    if (spec.family == RateFamily::Power) {
        const int deg = static_cast<int>(q);
        moment_sums(ws, deg + 1);
        // Binomial coefficients of (a - b)^deg.
        static constexpr double binom[4][5] = {
            {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}};
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t s = ws.where[j];
            const double v = ws.val[s];
            double powv[5] = {1, v, v * v, v * v * v, v * v * v * v};
            double below = 0.0, above = 0.0;
            for (int d = 0; d <= deg; ++d) {
                const double sgn = (d % 2 == 0) ? 1.0 : -1.0;
                below += binom[deg][d] * sgn * powv[deg - d] * ws.pre[d][ws.lo[s]];
                above += binom[deg][d] * sgn * powv[d] * ws.suf[deg - d][ws.hi[s]];
            }
            out[j] = below - above;
        }
        return;
    }

    exp_sums(ws, q);
    const bool growing = spec.family == RateFamily::PositiveExponential;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t s = ws.where[j];
        const double below_w = ws.pre[0][ws.lo[s]];
        const double above_w = ws.suf[0][ws.hi[s]];
        if (growing) {
            // sum_below w (e^{q(vj-vk)} - 1) - sum_above w (e^{q(vk-vj)} - 1)
            out[j] = ws.ep[s] * ws.pre[1][ws.lo[s]] - below_w -
                     (ws.em[s] * ws.suf[1][ws.hi[s]] - above_w);
        } else {
            // sum_below w (1 - e^{-q(vj-vk)}) - sum_above w (1 - e^{-q(vk-vj)})
            out[j] = below_w - ws.em[s] * ws.pre[2][ws.lo[s]] -
                     (above_w - ws.ep[s] * ws.suf[2][ws.hi[s]]);
        }
    }
}

/// S_j = sum_k w_k P((v_k - v_j)_+).
inline void gain_sum(const TransitionRateSpec& spec, std::span<const double> values,
                     std::span<const double> weights, SweepWorkspace& ws,
                     std::span<double> out) {
    const std::size_t n = values.size();
    const double q = spec.shape;
    const double spread = prepare_row(values, weights, ws);
    if (spread == 0.0) {
        for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
        return;
    }

    if (!splittable(spec, spread)) {
        // Direct suffix walk over the sorted row: only k with v_k > v_j count.
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t s = ws.where[j];
            double acc = 0.0;
            for (std::size_t t = ws.hi[s]; t < n; ++t)
                acc += ws.wt[t] * eval_primitive(spec, ws.val[t] - ws.val[s]);
            out[j] = acc;
        }
        return;
    }

    if (spec.family == RateFamily::Power) {
        const int deg = static_cast<int>(q) + 1;  // integrand degree + 1
        moment_sums(ws, deg + 1);
        static constexpr double binom[5][6] = {{1, 0, 0, 0, 0, 0},
                                               {1, 1, 0, 0, 0, 0},
                                               {1, 2, 1, 0, 0, 0},
                                               {1, 3, 3, 1, 0, 0},
                                               {1, 4, 6, 4, 1, 0}};
        const double scale = 1.0 / static_cast<double>(deg);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t s = ws.where[j];
            const double v = ws.val[s];
            double powv[6] = {1, v, v * v, v * v * v, v * v * v * v, v * v * v * v * v};
            double acc = 0.0;
            for (int d = 0; d <= deg; ++d) {
                const double sgn = (d % 2 == 0) ? 1.0 : -1.0;
                acc += binom[deg][d] * sgn * powv[d] * ws.suf[deg - d][ws.hi[s]];
            }
            out[j] = acc * scale;
        }
        return;
    }

    exp_sums(ws, q);
    const bool growing = spec.family == RateFamily::PositiveExponential;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t s = ws.where[j];
        const double above_w = ws.suf[0][ws.hi[s]];
        const double above_wv = ws.suf[3][ws.hi[s]];
        const double linear = above_wv - ws.val[s] * above_w;  // sum w (vk - vj)
        if (growing) {
            // P(d) = (e^{q d} - q d - 1) / q
            out[j] = (ws.em[s] * ws.suf[1][ws.hi[s]] - q * linear - above_w) / q;
        } else {
            // P(d) = (e^{-q d} + q d - 1) / q
            out[j] = (ws.ep[s] * ws.suf[2][ws.hi[s]] + q * linear - above_w) / q;
        }
    }
}

} // namespace repligame::detail
