#include "memsam/error.hpp"

namespace memsam {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IndexError: return "IndexError";
    case ErrorCode::DegenerateDescriptor: return "DegenerateDescriptor";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyBank: return "EmptyBank";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::DegenerateExemplar: return "DegenerateExemplar";
    case ErrorCode::NoForeground: return "NoForeground";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::PromptError: return "PromptError";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnmatchedPairs: return "UnmatchedPairs";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace memsam
