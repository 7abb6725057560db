// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vdds {

enum class ErrorKind {
    config,      // invalid parameters or configuration
    shape,       // array shape mismatch
    index,       // timestep / frame index out of range
    input,       // bad user input (files, manifests)
    capability,  // backend lacks a required feature
    backend,     // backend / estimator failure
    numeric,     // nonfinite values or zero-norm guards
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::shape: return "shape";
        case ErrorKind::index: return "index";
        case ErrorKind::input: return "input";
        case ErrorKind::capability: return "capability";
        case ErrorKind::backend: return "backend";
        case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

/// CLI exit code for an error category: 2 validation, 3 backend, 4 numeric guard.
inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::backend:
        case ErrorKind::capability: return 3;
        case ErrorKind::numeric: return 4;
        default: return 2;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

class IndexError : public Error {
public:
    explicit IndexError(const std::string& what) : Error(ErrorKind::index, what) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class CapabilityError : public Error {
public:
    explicit CapabilityError(const std::string& what) : Error(ErrorKind::capability, what) {}
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& what) : Error(ErrorKind::backend, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace vdds
