#pragma once

#include <stdexcept>
#include <string>

namespace latentlens {

enum class ErrorCode {
  InvalidArgument,
  BadMagic,
  TruncatedPayload,
  LabelOutOfRange,
  DimensionMismatch,
  BatchTooSmall,
  BadHeader,
  VersionMismatch,
  SizeMismatch,
  ImageTooLarge,
  AuthMissing,
  HttpError,
  MalformedResponse,
  Timeout,
  EmptyTextAfterTokenization,
  ZeroVector,
  DegenerateLabels,
  LengthMismatch,
  NoOverlap,
  IncompleteRun,
  Io,
};

const char* to_string(ErrorCode code);

// All library failures surface as this type; `code()` identifies the
// contract violation and `http_status()` is set for ErrorCode::HttpError.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, int http_status = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        http_status_(http_status) {}

  ErrorCode code() const noexcept { return code_; }
  int http_status() const noexcept { return http_status_; }

 private:
  ErrorCode code_;
  int http_status_;
};

}  // namespace latentlens
