#pragma once

#include <stdexcept>
#include <string>

namespace mist {

// Base for everything the library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad input values or malformed configuration.
struct ValidationError : Error {
    using Error::Error;
};

// A requested value lies outside what the model can produce.
struct RangeError : Error {
    using Error::Error;
};

// Kerr reduction refused: no single-well solution.
struct RegimeError : Error {
    using Error::Error;
};

// Perturbative or resonant denominator too small.
struct SingularityError : Error {
    using Error::Error;
};

struct ConvergenceError : Error {
    using Error::Error;
};

// Step underflow, trace drift, unitarity loss.
struct IntegratorError : Error {
    using Error::Error;
};

struct InternalError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Checkpoint header does not match or cannot be trusted.
struct IntegrityError : IoError {
    using IoError::IoError;
};

}  // namespace mist
