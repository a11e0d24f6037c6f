#pragma once

#include <stdexcept>
#include <string>

namespace koopstab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Parse failure in one of the text formats; carries the offending line.
struct FormatError : Error {
    FormatError(const std::string& path, int line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), path(path), line(line) {}
    std::string path;
    int line;
};

struct NumericalDomainError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    DivergenceError(double t_escape, const std::string& what)
        : Error(what + " (escape at t=" + std::to_string(t_escape) + ")"), t_escape(t_escape) {}
    double t_escape;
};

struct IdentificationError : Error {
    using Error::Error;
};

struct DefectiveOperatorError : IdentificationError {
    using IdentificationError::IdentificationError;
};

struct SamplingTooCoarseError : IdentificationError {
    using IdentificationError::IdentificationError;
};

struct PairingError : IdentificationError {
    using IdentificationError::IdentificationError;
};

struct IllConditionedEigenbasisError : IdentificationError {
    using IdentificationError::IdentificationError;
};

struct AlignmentError : Error {
    using Error::Error;
};

}  // namespace koopstab
