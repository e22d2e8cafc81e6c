#pragma once

#include <stdexcept>
#include <string>

namespace divide {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   usage/config -> 1, data -> 2, numeric -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument values (non-positive temperature, k out of range, ...).
struct InvalidParameterError : Error {
    using Error::Error;
};

// Incompatible matrix/layer shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Malformed config files or inconsistent training configuration.
struct ConfigError : InvalidParameterError {
    using InvalidParameterError::InvalidParameterError;
};

// Missing/inconsistent dataset files, degenerate inputs (zero-norm rows,
// single-sample batchnorm batches), corrupt checkpoints.
struct DataError : Error {
    using Error::Error;
};

// NaN/Inf escape or domain violations (log of zero where mass is required).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace divide
