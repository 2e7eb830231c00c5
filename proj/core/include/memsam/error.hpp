#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memsam {

enum class ErrorCode {
  // tensor-io
  ZeroVector,
  BadMagic,
  VersionMismatch,
  Truncated,
  DimensionOverflow,
  EmptyInput,
  IndexError,
  // memory-bank
  DegenerateDescriptor,
  DuplicateId,
  DimMismatch,
  EmptyBank,
  MissingManifest,
  BadManifest,
  MissingFile,
  ChecksumMismatch,
  // correspondence / prompts
  EmptySubset,
  DegenerateExemplar,
  NoForeground,
  InvariantViolation,
  // backends
  BackendError,
  PromptError,
  NoCandidates,
  // harness / cli
  ConfigError,
  UnmatchedPairs,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (notably the CLI exit-code mapping) can branch without parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace memsam
