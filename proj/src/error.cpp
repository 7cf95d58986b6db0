#include "lca/error.hpp"

namespace lca {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SentenceCountMismatch: return "SentenceCountMismatch";
    case ErrorCode::TokenCountMismatch: return "TokenCountMismatch";
    case ErrorCode::PairModeUnsupported: return "PairModeUnsupported";
    case ErrorCode::SingleClassCorpus: return "SingleClassCorpus";
    case ErrorCode::ZeroMassTag: return "ZeroMassTag";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingProbe: return "MissingProbe";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ThresholdUnreachable: return "ThresholdUnreachable";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  return code != ErrorCode::IoError && code != ErrorCode::ThresholdUnreachable;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace lca
