#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "repligame/errors.hpp"

namespace repligame {

// Comparison-rate families. Each maps a payoff difference x to a switching
// rate C(x) with C(x) = 0 for x <= 0 and C nondecreasing.
enum class RateFamily {
    Power,                // x^q, q >= 1
    Logarithmic,          // ln(q x + 1)
    PositiveExponential,  // e^{q x} - 1
    NegativeExponential,  // 1 - e^{-q x}, saturates at 1
};

inline const char* family_name(RateFamily f) {
    switch (f) {
        case RateFamily::Power: return "power";
        case RateFamily::Logarithmic: return "logarithmic";
        case RateFamily::PositiveExponential: return "positive_exponential";
        case RateFamily::NegativeExponential: return "negative_exponential";
    }
    return "?";
}

/// A comparison rate: family, shape parameter, and an optional truncation
/// level beyond which the rate is held constant.
struct TransitionRateSpec {
    RateFamily family = RateFamily::Power;
    double shape = 1.0;
    std::optional<double> truncation;

    static TransitionRateSpec make(RateFamily family, double shape,
                                   std::optional<double> truncation = std::nullopt) {
        if (!(shape > 0.0))
            throw ValidationError("rate shape violates q > 0");
        if (family == RateFamily::Power && shape < 1.0)
            throw ValidationError(
                "power family violates q >= 1; sub-linear shapes lose the uniqueness "
                "of the cost minimizer");
        if (truncation && !(*truncation > 0.0))
            throw ValidationError("truncation level violates L > 0");
        return {family, shape, truncation};
    }
};

namespace detail {

// C on the untruncated positive axis.
inline double rate_core(RateFamily f, double q, double x) {
    switch (f) {
        case RateFamily::Power:
            if (q == 1.0) return x;
            if (q == 2.0) return x * x;
            return std::pow(x, q);
        case RateFamily::Logarithmic: return std::log1p(q * x);
        case RateFamily::PositiveExponential: return std::expm1(q * x);
        case RateFamily::NegativeExponential: return -std::expm1(-q * x);
    }
    return 0.0;
}

// P(d) = integral of C from 0 to d, untruncated, d >= 0.
inline double primitive_core(RateFamily f, double q, double d) {
    const double s = q * d;
    switch (f) {
        case RateFamily::Power:
            if (q == 1.0) return 0.5 * d * d;
            if (q == 2.0) return d * d * d / 3.0;
            return std::pow(d, q + 1.0) / (q + 1.0);
        case RateFamily::Logarithmic: return ((s + 1.0) * std::log1p(s) - s) / q;
        case RateFamily::PositiveExponential: return (std::expm1(s) - s) / q;
        case RateFamily::NegativeExponential: return (std::expm1(-s) + s) / q;
    }
    return 0.0;
}

} // namespace detail

/// C(x): zero for x <= 0, the family's closed form above, held constant past
/// the truncation level when one is set.
inline double eval_rate(const TransitionRateSpec& spec, double x) {
    if (x <= 0.0) return 0.0;
    if (spec.truncation && x > *spec.truncation) x = *spec.truncation;
    return detail::rate_core(spec.family, spec.shape, x);
}

/// P(d) = integral of C over [0, max(d, 0)]. Past a truncation level the
/// integrand is constant, so P continues linearly with slope C(L).
inline double eval_primitive(const TransitionRateSpec& spec, double d) {
    if (d <= 0.0) return 0.0;
    if (spec.truncation && d > *spec.truncation) {
        const double level = *spec.truncation;
        return detail::primitive_core(spec.family, spec.shape, level) +
               detail::rate_core(spec.family, spec.shape, level) * (d - level);
    }
    return detail::primitive_core(spec.family, spec.shape, d);
}

/// Smallest w with C(w) = v. Throws OutOfRange when v is negative or never
/// attained (saturating family at v >= 1, truncated rates above C(L)).
inline double eval_inverse(const TransitionRateSpec& spec, double v) {
    if (v < 0.0) throw OutOfRange("inverse argument below the rate's range");
    if (v == 0.0) return 0.0;
    const double q = spec.shape;
    if (spec.truncation) {
        const double ceiling = detail::rate_core(spec.family, q, *spec.truncation);
        if (v > ceiling) throw OutOfRange("inverse argument above the truncated rate's range");
    }
    double w = 0.0;
    switch (spec.family) {
        case RateFamily::Power:
            w = (q == 1.0) ? v : (q == 2.0 ? std::sqrt(v) : std::pow(v, 1.0 / q));
            break;
        case RateFamily::Logarithmic: w = std::expm1(v) / q; break;
        case RateFamily::PositiveExponential: w = std::log1p(v) / q; break;
        case RateFamily::NegativeExponential:
            if (v >= 1.0) throw OutOfRange("saturating rate never reaches v >= 1");
            w = -std::log1p(-v) / q;
            break;
    }
    if (spec.truncation && w > *spec.truncation) w = *spec.truncation;
    return w;
}

/// Cost of sustaining control effort u at state weight p_z: the integral of
/// the inverse rate, infinite when the effort is unattainable (p_z = 0 with
/// u > 0, saturating families past p_z * sup C, truncated rates past
/// p_z * C(L)).
inline double revision_cost(const TransitionRateSpec& spec, double p_z, double u) {
    if (u == 0.0) return 0.0;
    if (p_z == 0.0) return std::numeric_limits<double>::infinity();
    const double a = u / p_z;
    const double q = spec.shape;
    if (spec.truncation) {
        const double ceiling = detail::rate_core(spec.family, q, *spec.truncation);
        if (a > ceiling) return std::numeric_limits<double>::infinity();
    }
    switch (spec.family) {
        case RateFamily::Power:
            return p_z * q / (q + 1.0) * std::pow(a, (q + 1.0) / q);
        case RateFamily::Logarithmic: return p_z * (std::expm1(a) - a) / q;
        case RateFamily::PositiveExponential:
            return p_z * ((1.0 + a) * std::log1p(a) - a) / q;
        case RateFamily::NegativeExponential:
            if (a > 1.0) return std::numeric_limits<double>::infinity();
            if (a == 1.0) return p_z / q;
            return p_z * ((1.0 - a) * std::log1p(-a) + a) / q;
    }
    return 0.0;
}

/// Lipschitz constant of the primitive on arguments <= m. P' = C is
/// nondecreasing, so the bound is just C(m).
inline double primitive_lipschitz_bound(const TransitionRateSpec& spec, double m) {
    return eval_rate(spec, m);
}

} // namespace repligame
