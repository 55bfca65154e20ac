#pragma once

#include <stdexcept>
#include <string>

namespace tauq {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed expression text. `offset` is the byte position of the problem.
struct ParseError : Error {
    std::size_t offset;
    ParseError(std::size_t off, const std::string& msg)
        : Error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

// Unbound variable or out-of-domain argument during evaluation.
struct EvalError : Error {
    using Error::Error;
};

// Unsupported derivative (non-constant pow exponent).
struct DiffError : Error {
    using Error::Error;
};

// Bad arguments, dimension mismatches, contract violations.
struct ValidationError : Error {
    using Error::Error;
};

// Non-convergence, singular systems, overflow.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace tauq
