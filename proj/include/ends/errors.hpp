#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ends {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed profile text; `position` is the 0-based column of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " (at position " + std::to_string(position) + ")"), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// A profile that is zero or negative at a probe point.
class PositivityError : public Error {
public:
    PositivityError(const std::string& what, double r) : Error(what), r_(r) {}
    double r() const noexcept { return r_; }

private:
    double r_;
};

/// Evaluation outside the tabulated range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Quadrature or root finding gave up.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Arguments violate a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Test function not compactly supported inside the model domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The requested criterion case does not match the profile's integrability.
class CaseError : public Error {
public:
    using Error::Error;
};

/// Configuration file problems, with 1-based line number (0 when not line-specific).
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace ends
