#pragma once

#include <stdexcept>
#include <string>

namespace feelsim {

// Invalid argument values (negative sigma, bad simplex, alpha <= 0, ...).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Shape/symmetry violations on vectors and matrices.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Graph is disconnected where a connected one is required.
struct ConnectivityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Source dataset cannot supply the requested partition.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or failed numeric procedures.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config file parsing/validation failures.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace feelsim
