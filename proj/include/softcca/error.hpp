#pragma once

#include <stdexcept>
#include <string>

namespace softcca {

// Base for every error the toolkit raises on purpose. The CLI catches this
// and turns it into a one-line diagnostic + nonzero exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension/shape mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Numerical failure: non-convergence, nonpositive eigenvalue, etc.
class NumericError : public Error {
public:
    using Error::Error;
};

// Degenerate input: batch too small, zero variance, single-class fold.
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Object used in the wrong mode or out of sequence.
class StateError : public Error {
public:
    using Error::Error;
};

// Bad configuration value, unknown key, invalid CLI argument.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed file (IDX, checkpoint, CSV).
class FormatError : public Error {
public:
    using Error::Error;
};

// Checkpoint and data disagree on dimensions.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace softcca
