#include "ddl/error.hpp"

namespace ddl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage: return "Usage";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PatchTooLarge: return "PatchTooLarge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyDictionary: return "EmptyDictionary";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotEnoughPatches: return "NotEnoughPatches";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::ImageSmallerThanWindow: return "ImageSmallerThanWindow";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::InvalidArgument:
      return 1;
    case ErrorCode::NonFinite:
    case ErrorCode::EmptyDictionary:
    case ErrorCode::ZeroReference:
      return 3;
    default:
      return 2;
  }
}

}  // namespace ddl
