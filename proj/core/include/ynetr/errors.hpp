#pragma once

#include <stdexcept>
#include <string>

namespace ynetr {

// Base class for every error raised by the library. error_class() is a short
// stable token the CLI prints so scripts can match on failure kinds.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* error_class() const noexcept { return "Error"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "ConfigError"; }
};

class ConfigMismatch : public ConfigError {
public:
    using ConfigError::ConfigError;
    const char* error_class() const noexcept override { return "ConfigMismatch"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "IoError"; }
};

// Malformed on-disk content (bad header, truncated payload, unknown kind).
class FormatError : public IoError {
public:
    using IoError::IoError;
    const char* error_class() const noexcept override { return "FormatError"; }
};

class ShapeError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "ShapeError"; }
};

class NumericError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "NumericError"; }
};

class GraphError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "GraphError"; }
};

class NoForeground : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "NoForeground"; }
};

class NoBackground : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "NoBackground"; }
};

class PhantomError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "PhantomError"; }
};

}  // namespace ynetr
