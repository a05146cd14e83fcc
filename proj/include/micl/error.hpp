#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace micl {

// Every failure the library can raise, named after its contract.
enum class ErrorCode {
  // dataset ingestion
  FileMissing,
  ParseError,
  DimensionMismatch,
  UnknownClass,
  DuplicateId,
  ZeroVector,
  IoError,
  ValidationError,
  // coreset
  QuotaUnsatisfiable,
  NoKeyForClass,
  DegenerateUpdate,
  EmptyQueryPool,
  KTooLarge,
  // experience bank
  AddWhenFull,
  UnknownTarget,
  MalformedAction,
  InvariantViolation,
  // prompts
  MissingImageRef,
  MaskViolation,
  DegenerateGroup,
  TemplateError,
  // model client
  Transport,
  Timeout,
  ScriptExhausted,
  ScriptMismatch,
  AttachmentUnresolvable,
  Unparseable,
  OutOfRange,
  // pipeline
  UnknownId,
  SeparationUnsatisfiable,
  ConfigError,
};

inline std::string_view error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::FileMissing: return "FileMissing";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::QuotaUnsatisfiable: return "QuotaUnsatisfiable";
    case ErrorCode::NoKeyForClass: return "NoKeyForClass";
    case ErrorCode::DegenerateUpdate: return "DegenerateUpdate";
    case ErrorCode::EmptyQueryPool: return "EmptyQueryPool";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::AddWhenFull: return "AddWhenFull";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::MalformedAction: return "MalformedAction";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::MissingImageRef: return "MissingImageRef";
    case ErrorCode::MaskViolation: return "MaskViolation";
    case ErrorCode::DegenerateGroup: return "DegenerateGroup";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::ScriptMismatch: return "ScriptMismatch";
    case ErrorCode::AttachmentUnresolvable: return "AttachmentUnresolvable";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::SeparationUnsatisfiable: return "SeparationUnsatisfiable";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace micl
