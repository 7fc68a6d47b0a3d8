#pragma once

#include <stdexcept>
#include <string>

namespace pinch {

enum class ErrorKind {
    QueryAmbiguous,
    DegenerateContacts,
    DegenerateTips,
    SingularKKT,
    PenetrationExceeded,
    GraspLost,
    DomainExceeded,
    DimensionMismatch,
    UnknownScene,
    ParseError,
    ValidationError,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::QueryAmbiguous: return "QueryAmbiguous";
    case ErrorKind::DegenerateContacts: return "DegenerateContacts";
    case ErrorKind::DegenerateTips: return "DegenerateTips";
    case ErrorKind::SingularKKT: return "SingularKKT";
    case ErrorKind::PenetrationExceeded: return "PenetrationExceeded";
    case ErrorKind::GraspLost: return "GraspLost";
    case ErrorKind::DomainExceeded: return "DomainExceeded";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnknownScene: return "UnknownScene";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

/// Base for every error raised by the library. `kind()` identifies the
/// failure; simulation aborts additionally carry the offending step.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    ConfigError(ErrorKind kind, std::string field, const std::string& what)
        : Error(kind, field.empty() ? what : field + ": " + what), field_(std::move(field))
    {
    }

    /// Dotted path of the offending key, e.g. "controller.f_d".
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace pinch
