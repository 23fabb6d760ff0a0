#pragma once

#include <stdexcept>
#include <string>

namespace phonon {

/// Failure category, mapped one-to-one onto CLI exit codes.
enum class ErrorCategory { config = 2, numeric = 3, io = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

class InvalidDimension : public NumericError {
public:
    using NumericError::NumericError;
};

class InvalidLayout : public NumericError {
public:
    using NumericError::NumericError;
};

/// Closed-form expression evaluated at (or numerically on) a pole.
class PoleError : public NumericError {
public:
    using NumericError::NumericError;
};

class FitError : public NumericError {
public:
    using NumericError::NumericError;
};

class DivergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace phonon
