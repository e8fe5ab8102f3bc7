#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace osul {

enum class ErrorCode {
    InvalidKnots,
    InvalidOrder,
    InvalidInput,
    InsufficientData,
    DegenerateKnots,
    InvalidDerivative,
    OutsideSupport,
    UnsupportedOrder,
    NotSymmetric,
    NotPositiveDefinite,
    ConvergenceFailure,
    SingularFit,
    InvalidLambda,
    SelectionFailure,
    InfeasibleTarget,
    BracketFailure,
    RankMismatch,
    DegenerateResponse,
    Unidentifiable,
    DegenerateSample,
    InputError,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidKnots: return "InvalidKnots";
        case ErrorCode::InvalidOrder: return "InvalidOrder";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::DegenerateKnots: return "DegenerateKnots";
        case ErrorCode::InvalidDerivative: return "InvalidDerivative";
        case ErrorCode::OutsideSupport: return "OutsideSupport";
        case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorCode::SingularFit: return "SingularFit";
        case ErrorCode::InvalidLambda: return "InvalidLambda";
        case ErrorCode::SelectionFailure: return "SelectionFailure";
        case ErrorCode::InfeasibleTarget: return "InfeasibleTarget";
        case ErrorCode::BracketFailure: return "BracketFailure";
        case ErrorCode::RankMismatch: return "RankMismatch";
        case ErrorCode::DegenerateResponse: return "DegenerateResponse";
        case ErrorCode::Unidentifiable: return "Unidentifiable";
        case ErrorCode::DegenerateSample: return "DegenerateSample";
        case ErrorCode::InputError: return "InputError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Numerical failures, as opposed to bad input or configuration.
constexpr bool is_numerical(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotPositiveDefinite:
        case ErrorCode::ConvergenceFailure:
        case ErrorCode::SingularFit:
        case ErrorCode::SelectionFailure:
        case ErrorCode::BracketFailure:
        case ErrorCode::RankMismatch:
        case ErrorCode::DegenerateResponse:
        case ErrorCode::DegenerateSample:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace osul
