#pragma once

#include <stdexcept>
#include <string>

namespace scribformer {

// Base of every error raised by the library. kind() is a stable, machine
// readable tag used by the CLI's one-line error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io", what) {}
};

struct IntegrityError : Error {
    explicit IntegrityError(const std::string& what) : Error("integrity", what) {}
};

struct ShapeMismatchError : Error {
    explicit ShapeMismatchError(const std::string& what) : Error("shape_mismatch", what) {}
};

struct ContractViolation : Error {
    explicit ContractViolation(const std::string& what) : Error("contract", what) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& what) : Error("training", what) {}
};

} // namespace scribformer
