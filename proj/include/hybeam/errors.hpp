#pragma once

#include <stdexcept>
#include <string>

namespace hybeam {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BudgetExceeded : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct InvalidNoise : Error {
    using Error::Error;
};

struct NotDivisible : Error {
    using Error::Error;
};

struct TooLarge : Error {
    using Error::Error;
};

struct ZeroMatrix : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct FixtureMissing : Error {
    using Error::Error;
};

// Thrown by scenario runners when a result violates a built-in sanity
// assertion (e.g. the timing order check); the CLI maps it to exit code 3.
struct AssertionFailure : Error {
    using Error::Error;
};

} // namespace hybeam
