#pragma once

#include <stdexcept>
#include <string>

namespace debias {

// Error taxonomy used across the library. The CLI maps these onto exit codes:
// ConfigError -> 1, DataError/ShapeError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor/layer dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A hyperparameter is outside its valid range (stride < 1, negative padding, ...).
class HyperparamError : public Error {
public:
    using Error::Error;
};

// Invalid user-facing configuration (bad JSON keys, inconsistent run setup).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or missing input data (datasets, checkpoints, labels out of range).
class DataError : public Error {
public:
    using Error::Error;
};

// Numerical-contract violations (non-scalar loss, zero variance, diagnostics).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace debias
