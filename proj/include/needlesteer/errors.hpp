#pragma once

#include <stdexcept>
#include <string>

namespace needlesteer {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller (e.g. non-unit axis).
class ContractError : public Error {
public:
    using Error::Error;
};

// Fixed-point overflow: the workspace does not fit the configured scale.
class RangeError : public Error {
public:
    using Error::Error;
};

// Invalid parameters or configuration (theta out of range, unsafe monitor settings, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Near-zero vectors, collinear samples and other ill-posed geometry.
class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

// Malformed scenario, plan, trace or log documents. Carries the offending line when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace needlesteer
