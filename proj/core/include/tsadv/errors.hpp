#pragma once

#include <stdexcept>
#include <string>

namespace tsadv {

// Bad flag/hyperparameter values. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable/ill-formed input files, shape mismatches between artifacts. Exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape mismatches inside the math core.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf detected, diverged training, degenerate numeric input. Exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tsadv
