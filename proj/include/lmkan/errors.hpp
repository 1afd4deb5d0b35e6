#pragma once

#include <stdexcept>
#include <string>

namespace lmkan {

/// Bad or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite loss or similar numeric abort (CLI exit code 3).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fusion precondition violated (CLI exit code 4).
struct FusionError : std::runtime_error {
    explicit FusionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or truncated model file.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lmkan
