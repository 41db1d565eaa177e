#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace donald {

enum class ErrorCode {
  NotFound,
  MalformedFile,
  AmbiguousLayout,
  TooFewTokens,
  DegenerateAxis,
  OutOfBounds,
  InconsistentLabels,
  InvalidPlotSpec,
  InvalidArgument,
  UnwritableOutput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::AmbiguousLayout: return "AmbiguousLayout";
    case ErrorCode::TooFewTokens: return "TooFewTokens";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InconsistentLabels: return "InconsistentLabels";
    case ErrorCode::InvalidPlotSpec: return "InvalidPlotSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnwritableOutput: return "UnwritableOutput";
  }
  return "Unknown";
}

// what() is "<Code>: <detail>", which the CLI prints verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace donald
