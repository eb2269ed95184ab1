#pragma once

#include <stdexcept>
#include <string>

namespace graphsmooth {

/// Machine-readable failure categories. Every library error carries one of
/// these codes so front ends can map failures without parsing messages.
enum class ErrorCode {
  InvalidEdge,
  DisconnectedGraph,
  DisconnectedAfterCutoff,
  DimensionMismatch,
  InvalidParameter,
  ZeroFilter,
  LowBandZero,
  OrderTooHigh,
  InvalidOrder,
  MeanNotEigenvector,
  EmptySupport,
  DegenerateSpectrum,
  NumericalFailure,
  EmptyBatch,
  NonPositiveSigma,
  ZeroSignal,
  ParseError,
  ColumnCountMismatch,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::DisconnectedAfterCutoff: return "DisconnectedAfterCutoff";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::ZeroFilter: return "ZeroFilter";
    case ErrorCode::LowBandZero: return "LowBandZero";
    case ErrorCode::OrderTooHigh: return "OrderTooHigh";
    case ErrorCode::InvalidOrder: return "InvalidOrder";
    case ErrorCode::MeanNotEigenvector: return "MeanNotEigenvector";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ColumnCountMismatch: return "ColumnCountMismatch";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace graphsmooth
