#pragma once

// Scenario configuration for the command-line front end: a flat key = value
// document with bracketed sections and '#' comments. Parsing is strict so a
// document either maps onto one experiment exactly or fails with the line
// that broke it; validation reuses the module invariants so a config that
// parses cleanly is runnable.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "repligame/grid.hpp"
#include "repligame/mfg.hpp"
#include "repligame/rates.hpp"
#include "repligame/utilities.hpp"

namespace repligame {

enum class ExperimentKind { Grd, Mfg, DeltaSweep, Refinement, Longrun, Equilibrium };
enum class KernelKind { PotentialConcave, PotentialConvex, Energy, Zero };

struct ScenarioConfig {
    ExperimentKind experiment = ExperimentKind::Grd;
    std::string output_path = "out";

    RateFamily rate_family = RateFamily::Power;
    double rate_shape = 1.0;

    KernelKind kernel = KernelKind::PotentialConcave;
    EnergyParams energy{};

    InitialDensityKind init = InitialDensityKind::Uniform;
    TerminalValueKind terminal = TerminalValueKind::Zero;
    double psi_bar = 0.0;

    std::size_t time_steps = 10000;
    std::size_t cells = 200;
    double horizon = 100.0;

    std::vector<double> deltas;
    double mfg_delta = 0.01;
    FixedPointConfig fixed_point{};

    std::size_t refinement_levels = 5;
    std::vector<double> longrun_x_bars;
    std::vector<double> longrun_times;

    bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& v, int line) {
    if (v.empty()) throw ParseError("missing value", line);
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || errno == ERANGE)
        throw ParseError("malformed number '" + v + "'", line);
    return x;
}

inline std::size_t parse_count(const std::string& v, int line) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError("malformed integer '" + v + "'", line);
    errno = 0;
    const unsigned long long x = std::strtoull(v.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ParseError("integer out of range '" + v + "'", line);
    return static_cast<std::size_t>(x);
}

// Lists take entries separated by whitespace, commas, or both.
inline std::vector<double> parse_list(const std::string& v, int line) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < v.size()) {
        const auto start = v.find_first_not_of(" \t,", pos);
        if (start == std::string::npos) break;
        auto stop = v.find_first_of(" \t,", start);
        if (stop == std::string::npos) stop = v.size();
        out.push_back(parse_number(v.substr(start, stop - start), line));
        pos = stop;
    }
    return out;
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_list(const std::vector<double>& vs) {
    std::string out;
    for (std::size_t m = 0; m < vs.size(); ++m) {
        if (m) out += ' ';
        out += format_number(vs[m]);
    }
    return out;
}

template <typename T>
struct Token {
    std::string_view name;
    T value;
};

inline constexpr Token<ExperimentKind> kExperiments[] = {
    {"grd", ExperimentKind::Grd},
    {"mfg", ExperimentKind::Mfg},
    {"delta_sweep", ExperimentKind::DeltaSweep},
    {"refinement", ExperimentKind::Refinement},
    {"longrun", ExperimentKind::Longrun},
    {"equilibrium", ExperimentKind::Equilibrium},
};
inline constexpr Token<RateFamily> kFamilies[] = {
    {"power", RateFamily::Power},
    {"logarithmic", RateFamily::Logarithmic},
    {"positive_exponential", RateFamily::PositiveExponential},
    {"negative_exponential", RateFamily::NegativeExponential},
};
inline constexpr Token<KernelKind> kKernels[] = {
    {"potential_concave", KernelKind::PotentialConcave},
    {"potential_convex", KernelKind::PotentialConvex},
    {"energy", KernelKind::Energy},
    {"zero", KernelKind::Zero},
};
inline constexpr Token<InitialDensityKind> kInits[] = {
    {"uniform", InitialDensityKind::Uniform},
    {"finite_support", InitialDensityKind::FiniteSupport},
};
inline constexpr Token<TerminalValueKind> kTerminals[] = {
    {"zero", TerminalValueKind::Zero},
    {"linear", TerminalValueKind::LinearGain},
};

template <typename T, std::size_t N>
T parse_token(const Token<T> (&table)[N], const std::string& v, const char* what, int line) {
    for (const auto& t : table)
        if (t.name == v) return t.value;
    throw ParseError(std::string("unknown ") + what + " '" + v + "'", line);
}

template <typename T, std::size_t N>
std::string_view token_name(const Token<T> (&table)[N], T value) {
    for (const auto& t : table)
        if (t.value == value) return t.name;
    return "?";
}

inline void check_comparison_ladder(const std::vector<double>& deltas, const char* who) {
    if (deltas.empty())
        throw ValidationError(std::string(who) + " violates nonempty deltas");
    std::vector<double> sorted = deltas;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t m = 0; m < sorted.size(); ++m) {
        if (!(sorted[m] > 0.0))
            throw ValidationError(std::string(who) + " violates delta > 0");
        if (m > 0 && sorted[m] == sorted[m - 1])
            throw ValidationError(std::string(who) + " violates distinct deltas");
    }
}

} // namespace detail

inline void validate_config(const ScenarioConfig& cfg) {
    TransitionRateSpec::make(cfg.rate_family, cfg.rate_shape);
    build_grid(cfg.time_steps, cfg.cells, cfg.horizon);
    cfg.fixed_point.validate();
    if (cfg.kernel == KernelKind::Energy) cfg.energy.validate();
    if (cfg.terminal == TerminalValueKind::LinearGain && !(cfg.psi_bar >= 0.0))
        throw ValidationError("terminal gain violates psi_bar >= 0");

    const bool compares = cfg.experiment == ExperimentKind::Mfg ||
                          cfg.experiment == ExperimentKind::DeltaSweep ||
                          cfg.experiment == ExperimentKind::Refinement;
    if (compares && cfg.time_steps % 2 != 0)
        throw ValidationError("half-time comparison violates even time_steps");

    switch (cfg.experiment) {
    case ExperimentKind::Grd:
        break;
    case ExperimentKind::Mfg:
        if (!(cfg.mfg_delta > 0.0)) throw ValidationError("mfg violates delta > 0");
        break;
    case ExperimentKind::DeltaSweep:
        detail::check_comparison_ladder(cfg.deltas, "sweep");
        break;
    case ExperimentKind::Refinement:
        if (cfg.refinement_levels < 3)
            throw ValidationError("refinement violates levels >= 3");
        detail::check_comparison_ladder(cfg.deltas, "refinement");
        break;
    case ExperimentKind::Longrun: {
        if (cfg.kernel != KernelKind::Energy)
            throw ValidationError("long run violates energy kernel");
        if (cfg.longrun_x_bars.empty())
            throw ValidationError("long run violates nonempty x_bars");
        if (cfg.longrun_times.empty())
            throw ValidationError("long run violates nonempty times");
        for (const double x : cfg.longrun_x_bars)
            if (!(x > 0.0 && x <= 1.0))
                throw ValidationError("long run violates 0 < x_bar <= 1");
        double prev = -1.0;
        for (const double t : cfg.longrun_times) {
            if (!(t >= 0.0)) throw ValidationError("long run violates time >= 0");
            if (!(t > prev)) throw ValidationError("long run violates ascending times");
            const double k = std::round(t / 0.1);
            if (std::abs(t - k * 0.1) > 1e-9 * std::max(1.0, t))
                throw ValidationError("long run violates times on the dt = 0.1 ladder");
            prev = t;
        }
        break;
    }
    case ExperimentKind::Equilibrium:
        if (cfg.kernel != KernelKind::Energy)
            throw ValidationError("equilibrium violates energy kernel");
        break;
    }
}

inline ScenarioConfig parse_config(std::string_view text) {
    using namespace detail;
    ScenarioConfig cfg;
    std::string section;
    std::set<std::string> seen;
    bool have_experiment = false;
    int line_no = 0;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (const auto hash = raw.find('#'); hash != std::string_view::npos)
            raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", line_no);
            const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
            static const std::set<std::string> known = {
                "rate",       "kernel", "init",       "terminal", "grid",
                "sweep",      "mfg",    "fixed_point", "refinement", "longrun"};
            if (!known.count(name))
                throw ParseError("unknown section '" + name + "'", line_no);
            section = name;
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ParseError("missing key", line_no);
        if (!seen.insert(section + "." + key).second)
            throw ParseError("duplicate key '" + key + "'", line_no);

        const auto unknown = [&]() -> ParseError {
            const std::string where =
                section.empty() ? "the top level" : "section [" + section + "]";
            return ParseError("unknown key '" + key + "' in " + where, line_no);
        };

        if (section.empty()) {
            if (key == "experiment") {
                cfg.experiment = parse_token(kExperiments, value, "experiment", line_no);
                have_experiment = true;
            } else if (key == "output_path") {
                if (value.empty()) throw ParseError("missing value", line_no);
                cfg.output_path = value;
            } else {
                throw unknown();
            }
        } else if (section == "rate") {
            if (key == "family")
                cfg.rate_family = parse_token(kFamilies, value, "rate family", line_no);
            else if (key == "q")
                cfg.rate_shape = parse_number(value, line_no);
            else
                throw unknown();
        } else if (section == "kernel") {
            if (key == "type")
                cfg.kernel = parse_token(kKernels, value, "kernel type", line_no);
            else if (key == "alpha")
                cfg.energy.alpha = parse_number(value, line_no);
            else if (key == "sigma")
                cfg.energy.sigma = parse_number(value, line_no);
            else if (key == "w")
                cfg.energy.w = parse_number(value, line_no);
            else if (key == "x_bar")
                cfg.energy.x_bar = parse_number(value, line_no);
            else
                throw unknown();
        } else if (section == "init") {
            if (key == "kind")
                cfg.init = parse_token(kInits, value, "initial density kind", line_no);
            else
                throw unknown();
        } else if (section == "terminal") {
            if (key == "kind")
                cfg.terminal = parse_token(kTerminals, value, "terminal kind", line_no);
            else if (key == "psi_bar")
                cfg.psi_bar = parse_number(value, line_no);
            else
                throw unknown();
        } else if (section == "grid") {
            if (key == "time_steps")
                cfg.time_steps = parse_count(value, line_no);
            else if (key == "cells")
                cfg.cells = parse_count(value, line_no);
            else if (key == "horizon")
                cfg.horizon = parse_number(value, line_no);
            else
                throw unknown();
        } else if (section == "sweep") {
            if (key == "deltas")
                cfg.deltas = parse_list(value, line_no);
            else
                throw unknown();
        } else if (section == "mfg") {
            if (key == "delta")
                cfg.mfg_delta = parse_number(value, line_no);
            else
                throw unknown();
        } else if (section == "fixed_point") {
            if (key == "relaxation")
                cfg.fixed_point.relaxation = parse_number(value, line_no);
            else if (key == "max_iters")
                cfg.fixed_point.max_iters = parse_count(value, line_no);
            else if (key == "tol")
                cfg.fixed_point.tol = parse_number(value, line_no);
            else if (key == "divergence_cap")
                cfg.fixed_point.divergence_cap = parse_number(value, line_no);
            else
                throw unknown();
        } else if (section == "refinement") {
            if (key == "levels")
                cfg.refinement_levels = parse_count(value, line_no);
            else
                throw unknown();
        } else if (section == "longrun") {
            if (key == "x_bars")
                cfg.longrun_x_bars = parse_list(value, line_no);
            else if (key == "times")
                cfg.longrun_times = parse_list(value, line_no);
            else
                throw unknown();
        }
    }

    if (!have_experiment) throw ValidationError("config violates required experiment");
    validate_config(cfg);
    return cfg;
}

/// Canonical echo of a config: every key in a fixed order, numbers at full
/// precision, so parse_config(render_config(c)) == c and the echo doubles as
/// the metadata record of a run.
inline std::string render_config(const ScenarioConfig& cfg) {
    using namespace detail;
    std::string out;
    const auto put = [&](std::string_view key, std::string_view value) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    };
    put("experiment", token_name(kExperiments, cfg.experiment));
    put("output_path", cfg.output_path);
    out += "\n[rate]\n";
    put("family", token_name(kFamilies, cfg.rate_family));
    put("q", format_number(cfg.rate_shape));
    out += "\n[kernel]\n";
    put("type", token_name(kKernels, cfg.kernel));
    put("alpha", format_number(cfg.energy.alpha));
    put("sigma", format_number(cfg.energy.sigma));
    put("w", format_number(cfg.energy.w));
    put("x_bar", format_number(cfg.energy.x_bar));
    out += "\n[init]\n";
    put("kind", token_name(kInits, cfg.init));
    out += "\n[terminal]\n";
    put("kind", token_name(kTerminals, cfg.terminal));
    put("psi_bar", format_number(cfg.psi_bar));
    out += "\n[grid]\n";
    put("time_steps", std::to_string(cfg.time_steps));
    put("cells", std::to_string(cfg.cells));
    put("horizon", format_number(cfg.horizon));
    out += "\n[sweep]\n";
    put("deltas", format_list(cfg.deltas));
    out += "\n[mfg]\n";
    put("delta", format_number(cfg.mfg_delta));
    out += "\n[fixed_point]\n";
    put("relaxation", format_number(cfg.fixed_point.relaxation));
    put("max_iters", std::to_string(cfg.fixed_point.max_iters));
    put("tol", format_number(cfg.fixed_point.tol));
    put("divergence_cap", format_number(cfg.fixed_point.divergence_cap));
    out += "\n[refinement]\n";
    put("levels", std::to_string(cfg.refinement_levels));
    out += "\n[longrun]\n";
    put("x_bars", format_list(cfg.longrun_x_bars));
    put("times", format_list(cfg.longrun_times));
    return out;
}

} // namespace repligame
