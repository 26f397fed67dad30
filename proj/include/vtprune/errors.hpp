#pragma once

#include <stdexcept>
#include <string>

namespace vtprune {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or length mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter value (empty input, out-of-range index, bad config).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Non-finite value or integer overflow produced where exact arithmetic is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem or serialization failure; message carries the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Requested token budget cannot be met by the solver policy.
/// Carries the feasible budget range for the attempted configuration.
class InfeasibleBudgetError : public Error {
public:
    InfeasibleBudgetError(const std::string& msg, double feasible_min, double feasible_max)
        : Error(msg), feasible_min(feasible_min), feasible_max(feasible_max) {}

    double feasible_min;
    double feasible_max;
};

} // namespace vtprune
