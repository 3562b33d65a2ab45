#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddl {

enum class ErrorCode {
  Usage,
  Io,
  BadMagic,
  CountMismatch,
  Truncated,
  LabelOutOfRange,
  InvalidArgument,
  PatchTooLarge,
  ShapeMismatch,
  DimensionMismatch,
  EmptyDictionary,
  NonFinite,
  NotEnoughPatches,
  ZeroReference,
  ImageSmallerThanWindow,
  LengthMismatch,
};

std::string_view to_string(ErrorCode code);

// Process exit status for a failure of this kind: 1 usage, 2 data, 3 numerical.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ddl
