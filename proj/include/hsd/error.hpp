#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsd {

/// Failure categories. The CLI maps each category onto a process exit code.
enum class ErrorCode {
    // input errors
    MalformedHeader,
    SizeMismatch,
    UnsupportedDataType,
    NonFiniteData,
    LengthMismatch,
    TooFewBands,
    DuplicateName,
    RaggedRows,
    NonFiniteValue,
    EmptyLibrary,
    GridMismatch,
    SpecOutOfBounds,
    InvalidArgument,
    // numerical failures
    DegenerateScene,
    NotConverged,
    NotPSD,
    RankTooHigh,
    RankZero,
    ZeroTarget,
    ConstantSpectrum,
    InsufficientBackground,
    // I/O
    IoFailure,
};

enum class ErrorCategory { Input, Numerical, Io };

constexpr ErrorCategory category(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DegenerateScene:
    case ErrorCode::NotConverged:
    case ErrorCode::NotPSD:
    case ErrorCode::RankTooHigh:
    case ErrorCode::RankZero:
    case ErrorCode::ZeroTarget:
    case ErrorCode::ConstantSpectrum:
    case ErrorCode::InsufficientBackground:
        return ErrorCategory::Numerical;
    case ErrorCode::IoFailure:
        return ErrorCategory::Io;
    default:
        return ErrorCategory::Input;
    }
}

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace hsd
