#pragma once

#include <stdexcept>
#include <string>

namespace charweave {

/// Recoverable input/domain error. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// A coarse label matched no character above the similarity floor.
class NoMatchError : public Error {
public:
    explicit NoMatchError(const std::string& message) : Error(message) {}
};

/// Two or more scene entities share the requested head.
class AmbiguityError : public Error {
public:
    explicit AmbiguityError(const std::string& message) : Error(message) {}
};

/// Broken internal invariant (a bug, not bad input). CLI exit code 2.
class InvariantViolation : public std::logic_error {
public:
    explicit InvariantViolation(const std::string& message) : std::logic_error(message) {}
};

}  // namespace charweave
