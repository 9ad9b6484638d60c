// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace acn {

/// Bad configuration: invalid values, unknown keys, contract violations
/// caught before any data is touched. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Problems with input data or on-disk artifacts: missing files, malformed
/// volumes, label values outside the allowed set. CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure during optimization (non-finite losses and the like).
/// CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace acn
