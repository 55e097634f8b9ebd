// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace espada {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files (bad JSON, bad record shape). Carries a line number
// in the message where one is known.
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally well-formed data that violates an invariant
// (overlapping segments, varying dimensions, out-of-range values).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Arguments outside an operation's domain (non-finite inputs, offset >= factor).
class DomainError : public Error {
public:
    using Error::Error;
};

// Filesystem / network / environment failures.
class IoError : public Error {
public:
    using Error::Error;
};

// A provider endpoint answered with something that is not the agreed format.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// A requested label / id does not exist in the data.
class LookupError : public Error {
public:
    using Error::Error;
};

// Non-fatal diagnostics (dropped segments, clipped indices, odd config values)
// go through this sink. Defaults to stderr; tests may capture.
void log_warning(const std::string& message);
void set_warning_handler(std::function<void(const std::string&)> handler);

} // namespace espada
