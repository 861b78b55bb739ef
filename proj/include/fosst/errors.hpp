#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fosst {

/// Error categories. The CLI maps them to exit codes 2, 3 and 4.
enum class ErrorKind { Config, Data, Numeric };

/// Base of every error raised by the library. The message is prefixed with
/// the originating module, e.g. "[tfr] signal too short".
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string& what)
        : std::runtime_error("[" + module + "] " + what), kind_(kind), module_(std::move(module)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

/// Invalid parameters, unknown configuration keys, contract violations.
class ConfigError : public Error {
public:
    ConfigError(std::string module, const std::string& what)
        : Error(ErrorKind::Config, std::move(module), what) {}
};

/// Unreadable, misaligned or unrecoverable input data.
class DataError : public Error {
public:
    DataError(std::string module, const std::string& what)
        : Error(ErrorKind::Data, std::move(module), what) {}
};

/// Degenerate numerical situations (zero reference, zero divisor, empty spectrum).
class NumericError : public Error {
public:
    NumericError(std::string module, const std::string& what)
        : Error(ErrorKind::Numeric, std::move(module), what) {}
};

inline int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Numeric: return 4;
    }
    return 1;
}

}  // namespace fosst
