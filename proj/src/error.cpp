#include "latentlens/error.hpp"

namespace latentlens {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::ImageTooLarge: return "ImageTooLarge";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::EmptyTextAfterTokenization: return "EmptyTextAfterTokenization";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::IncompleteRun: return "IncompleteRun";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace latentlens
