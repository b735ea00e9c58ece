#pragma once

#include <stdexcept>
#include <string>

namespace pllhb {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameters (non-positive time constants, bad ranges, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain where a numerical routine is valid.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Failure of a numerical procedure on otherwise valid input.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace pllhb
