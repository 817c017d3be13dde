#pragma once

#include <stdexcept>
#include <string>

namespace qlaur {

enum class ErrorKind {
    InvalidBase,
    SingularPochhammer,
    NonConvergent,
    ZeroPoint,
    DimensionMismatch,
    SingularPrefactor,
    ZeroParameter,
    SchemaError,
    IoError,
    UnknownSuite,
};

inline const char* to_string(ErrorKind k) noexcept
{
    switch (k) {
    case ErrorKind::InvalidBase: return "InvalidBase";
    case ErrorKind::SingularPochhammer: return "SingularPochhammer";
    case ErrorKind::NonConvergent: return "NonConvergent";
    case ErrorKind::ZeroPoint: return "ZeroPoint";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularPrefactor: return "SingularPrefactor";
    case ErrorKind::ZeroParameter: return "ZeroParameter";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::UnknownSuite: return "UnknownSuite";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace qlaur
