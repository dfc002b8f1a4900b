#include "kmefda/error.hpp"

namespace kmefda {

std::string_view error_code_name(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::OverParameterized: return "over-parameterized";
    case ErrorCode::IllConditionedBasis: return "ill-conditioned-basis";
    case ErrorCode::IncompatibleBasis: return "incompatible-basis";
    case ErrorCode::NotPositiveSemidefinite: return "not-positive-semidefinite";
    case ErrorCode::NumericalInconsistency: return "numerical-inconsistency";
    case ErrorCode::SingularDesign: return "singular-design";
    case ErrorCode::UnderDetermined: return "under-determined";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::InsufficientPermutations: return "insufficient-permutations";
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::SchemaError: return "schema-error";
    case ErrorCode::IoError: return "io-error";
    }
    return "unknown";
}

}  // namespace kmefda
