#pragma once

#include <stdexcept>
#include <string>

namespace dplac {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

/// Raised when a simulation or training state stops being finite.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace dplac
