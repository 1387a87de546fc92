#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace evspike {

/// Invalid configuration (names the violated invariant).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

/// Malformed persistent data (container magic, header, truncation).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

/// Invalid runtime data (non-finite samples, unsorted inputs, ...).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

}  // namespace evspike
