#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kmefda {

enum class ErrorCode {
    InvalidArgument,
    OverParameterized,
    IllConditionedBasis,
    IncompatibleBasis,
    NotPositiveSemidefinite,
    NumericalInconsistency,
    SingularDesign,
    UnderDetermined,
    LengthMismatch,
    InsufficientPermutations,
    InvalidConfig,
    ParseError,
    SchemaError,
    IoError,
};

std::string_view error_code_name(ErrorCode code);

/// Library-wide exception. Every failure mode documented on an operation maps
/// to one ErrorCode so the CLI can emit a stable machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message)
{
    if (!condition) {
        throw Error(code, message);
    }
}

}  // namespace kmefda
