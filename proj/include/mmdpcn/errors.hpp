#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmdpcn {

enum class ErrorKind {
  DimensionMismatch,
  NonConvergence,
  NonFinite,
  ZeroColumn,
  GridMismatch,
  LengthMismatch,
  EmptyVector,
  InvalidK,
  DegenerateData,
  InvalidArgument,
  IoError,
  FormatError,
  ShapeError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and tests)
// can branch on the category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

// Literal messages cost nothing on the success path.
inline void require(bool ok, ErrorKind kind, std::string_view what) {
  if (!ok) fail(kind, std::string(what));
}

}  // namespace mmdpcn
