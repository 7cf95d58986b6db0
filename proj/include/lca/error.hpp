#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lca {

enum class ErrorCode {
  // input validation
  MalformedRecord,
  MalformedLine,
  EmptyFile,
  DimensionMismatch,
  NonFiniteValue,
  IndexOutOfRange,
  SentenceCountMismatch,
  TokenCountMismatch,
  PairModeUnsupported,
  SingleClassCorpus,
  ZeroMassTag,
  AllZeroWeights,
  EmptyGrid,
  EmptySubset,
  EmptySelection,
  InvalidArgument,
  MissingProbe,
  MissingArtifact,
  // runtime
  IoError,
  ThresholdUnreachable,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes caused by bad input (CLI exit status 1); false for
/// failures while running (exit status 2).
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace lca
