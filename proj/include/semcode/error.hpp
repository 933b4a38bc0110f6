#pragma once

#include <stdexcept>
#include <string>

namespace semcode {

enum class ErrorCode {
    DimensionMismatch,
    InsufficientData,
    CoverageGap,
    InvalidR,
    InvalidPair,
    Infeasible,
    PlanMismatch,
    NonpositiveStep,
    SymbolOutOfRange,
    CorruptBitstream,
    ZeroSignal,
    ScoreMismatch,
    InvalidDimensions,
    CorruptFrame,
    EmptyStream,
    TooSmall,
    UnsupportedFormat,
    MalformedHeader,
    Truncated,
    NoCorpus,
    UnknownColumn,
    ConfigError,
    IoError,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
        case ErrorCode::InsufficientData: return "INSUFFICIENT_DATA";
        case ErrorCode::CoverageGap: return "COVERAGE_GAP";
        case ErrorCode::InvalidR: return "INVALID_R";
        case ErrorCode::InvalidPair: return "INVALID_PAIR";
        case ErrorCode::Infeasible: return "INFEASIBLE";
        case ErrorCode::PlanMismatch: return "PLAN_MISMATCH";
        case ErrorCode::NonpositiveStep: return "NONPOSITIVE_STEP";
        case ErrorCode::SymbolOutOfRange: return "SYMBOL_OUT_OF_RANGE";
        case ErrorCode::CorruptBitstream: return "CORRUPT_BITSTREAM";
        case ErrorCode::ZeroSignal: return "ZERO_SIGNAL";
        case ErrorCode::ScoreMismatch: return "SCORE_MISMATCH";
        case ErrorCode::InvalidDimensions: return "INVALID_DIMENSIONS";
        case ErrorCode::CorruptFrame: return "CORRUPT_FRAME";
        case ErrorCode::EmptyStream: return "EMPTY_STREAM";
        case ErrorCode::TooSmall: return "TOO_SMALL";
        case ErrorCode::UnsupportedFormat: return "UNSUPPORTED_FORMAT";
        case ErrorCode::MalformedHeader: return "MALFORMED_HEADER";
        case ErrorCode::Truncated: return "TRUNCATED";
        case ErrorCode::NoCorpus: return "NO_CORPUS";
        case ErrorCode::UnknownColumn: return "UNKNOWN_COLUMN";
        case ErrorCode::ConfigError: return "CONFIG_ERROR";
        case ErrorCode::IoError: return "IO_ERROR";
    }
    return "UNKNOWN";
}

/// Exception carrying a machine-checkable error code alongside the message.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace semcode
