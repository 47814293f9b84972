#pragma once

#include <stdexcept>
#include <string>

namespace sarsfp {

// Error taxonomy mirrors the CLI exit-code contract:
// ConfigError -> 2, IoError -> 3, ValidationError -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : IoError {
    explicit ParseError(const std::string& msg) : IoError(msg) {}
};

}  // namespace sarsfp
