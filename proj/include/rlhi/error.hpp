#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rlhi {

enum class ErrorCode {
  InvalidArgument,
  FileNotFound,
  CorpusCorrupt,
  MissingLabels,
  SplitImpossible,
  Timeout,
  RateLimited,
  Transport,
  MalformedResponse,
  CassetteMiss,
  UnparseableVerdict,
  EmptyPersona,
  EmptyRewrite,
  ScoringFailed,
  DegenerateCandidates,
  AllScoresEqual,
  MissingRewards,
  CandidateNotInUniverse,
  DivergedLoss,
  NoErrorStep,
  InsufficientErroneous,
  MisalignedResponses,
  DegenerateVector,
  EmptyInput,
  Config,
  Dependency,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

  /// Same code, with `where` prepended to the detail.
  Error within(const std::string& where) const { return Error(code_, where + ": " + detail_); }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace rlhi
