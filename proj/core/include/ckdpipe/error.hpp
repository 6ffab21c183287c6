#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ckdpipe {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number of the offending line.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A column or token does not match the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A precondition on a function argument was violated.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A category token has no entry in a fitted encoder.
class EncodingError : public Error {
public:
    using Error::Error;
};

/// An object was used before it was fitted, or fitted on the wrong partition.
class StateError : public Error {
public:
    using Error::Error;
};

/// A pipeline contract was broken (e.g. masked cells reaching standardization).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given input (e.g. AUC on a single class).
class MetricError : public Error {
public:
    using Error::Error;
};

} // namespace ckdpipe
