#pragma once

#include <stdexcept>
#include <string>

namespace repligame {

// Argument outside the domain of an inverse or lookup.
struct OutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A time-step restriction required by the scheme does not hold.
// The message spells out the violated inequality with its numbers.
struct StabilityViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Vector or matrix extents do not match the grid they are used with.
struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Two results live on different grids and cannot be compared.
struct Incomparable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration text could not be parsed; carries the offending line.
struct ParseError : std::runtime_error {
    ParseError(const std::string& what, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
    int line_number;
};

// A parsed value violates a documented invariant; the message names it.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace repligame
