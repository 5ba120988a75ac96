#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sevq {

enum class ErrorKind {
  kIo,          // missing or unreadable/unwritable file
  kParse,       // malformed text or non-numeric cell
  kShape,       // inconsistent dimensions
  kValue,       // non-finite or otherwise invalid numeric value
  kCorrupt,     // structurally broken model/token file
  kVersion,     // unsupported format_version
  kRange,       // index out of range
  kConfig,      // invalid parameter
  kNoCandidate, // query has no edge into the requested cluster
  kInvariant,   // internal consistency check failed
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sevq
