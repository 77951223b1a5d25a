// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sargcp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the valid domain of an operation (non-finite values,
/// times outside an orbit's validity, degenerate geometry).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative method failed to reach its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Normal matrix too ill-conditioned to resolve the unknowns.
class IllConditionedError : public Error {
public:
    IllConditionedError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Malformed file content. `location` is a 1-based line number for text
/// formats or a byte offset for binary ones.
class ParseError : public Error {
public:
    enum class Unit { Line, Byte };

    ParseError(std::string source, Unit unit, std::size_t location, const std::string& reason)
        : Error(source + (unit == Unit::Line ? ":line " : ":byte ") + std::to_string(location) +
                ": " + reason),
          source_(std::move(source)),
          unit_(unit),
          location_(location) {}

    const std::string& source() const noexcept { return source_; }
    Unit unit() const noexcept { return unit_; }
    std::size_t location() const noexcept { return location_; }

private:
    std::string source_;
    Unit unit_;
    std::size_t location_;
};

}  // namespace sargcp
