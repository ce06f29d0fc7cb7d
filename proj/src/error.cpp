#include "hsd/error.hpp"

namespace hsd {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnsupportedDataType: return "UnsupportedDataType";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewBands: return "TooFewBands";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyLibrary: return "EmptyLibrary";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SpecOutOfBounds: return "SpecOutOfBounds";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateScene: return "DegenerateScene";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::RankTooHigh: return "RankTooHigh";
    case ErrorCode::RankZero: return "RankZero";
    case ErrorCode::ZeroTarget: return "ZeroTarget";
    case ErrorCode::ConstantSpectrum: return "ConstantSpectrum";
    case ErrorCode::InsufficientBackground: return "InsufficientBackground";
    case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

} // namespace hsd
