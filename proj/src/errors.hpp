#pragma once

#include <stdexcept>
#include <string>

namespace meanflow {

// Error taxonomy shared by the core, the C API and the CLI exit codes.
enum class ErrorKind { Config = 2, Numeric = 3, Io = 4, Invalid = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(std::string msg) : Error(ErrorKind::Config, std::move(msg)) {}
};

// Shape/usage violations inside the math engine.
struct InvalidError : Error {
    explicit InvalidError(std::string msg) : Error(ErrorKind::Invalid, std::move(msg)) {}
};

// NaN/Inf escaped from a numeric path.
struct NumericError : Error {
    explicit NumericError(std::string msg) : Error(ErrorKind::Numeric, std::move(msg)) {}
};

struct IoError : Error {
    explicit IoError(std::string msg) : Error(ErrorKind::Io, std::move(msg)) {}
};

}  // namespace meanflow
