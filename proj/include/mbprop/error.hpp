#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mbprop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the supported domain of a model.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Physically meaningless parameter combination.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input data that does not validate (non-Hermitian matrix, negative spectrum).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Request that would exceed the configured memory budget.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Integration left its tolerance envelope. Carries the first offending grid point.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::size_t z_index, std::size_t t_index)
        : Error(what), z_index_(z_index), t_index_(t_index) {}

    std::size_t z_index() const noexcept { return z_index_; }
    std::size_t t_index() const noexcept { return t_index_; }

private:
    std::size_t z_index_;
    std::size_t t_index_;
};

/// Optimizer did not produce a usable optimum. `last_iterate` holds the final parameters.
class FitError : public Error {
public:
    FitError(const std::string& what, std::vector<double> last_iterate = {})
        : Error(what), last_iterate_(std::move(last_iterate)) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
    std::vector<double> last_iterate_;
};

}  // namespace mbprop
