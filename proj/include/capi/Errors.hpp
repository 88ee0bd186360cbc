// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAPI_ERRORS_HPP
#define CAPI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace capi {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad call-graph files, spec sources, filter files,
/// symbol tables, traces. Carries an optional source position.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error(message) {}

    ParseError(const std::string& source, int line, int column, const std::string& message)
        : Error(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column) {}

    ParseError(const std::string& source, int line, const std::string& message)
        : Error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_ = 0;
    int column_ = 0;
};

/// Violation of a runtime registry constraint (full registry, duplicate
/// object, reserved ids, out-of-range packed ids).
class RuntimeRegistryError : public Error {
public:
    using Error::Error;
};

/// Ill-formed event stream observed by a backend (unbalanced enter/exit).
class TraceError : public Error {
public:
    using Error::Error;
};

} // namespace capi

#endif // CAPI_ERRORS_HPP
