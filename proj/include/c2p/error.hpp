#pragma once

#include <stdexcept>
#include <string>

namespace c2p {

enum class ErrorKind {
  NotFound,
  EmptyDataset,
  InvalidImage,
  InvalidInput,
  AlreadyMerged,
  Undefined,
  DecodeError,
  NumericalError,
  VersionError,
  IoError,
  Unsupported,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvalidImage: return "InvalidImage";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::AlreadyMerged: return "AlreadyMerged";
    case ErrorKind::Undefined: return "Undefined";
    case ErrorKind::DecodeError: return "DecodeError";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::VersionError: return "VersionError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::Unsupported: return "Unsupported";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace c2p
