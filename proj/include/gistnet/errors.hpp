#pragma once

#include <stdexcept>
#include <string>

namespace gist {

enum class ErrorKind {
  kShape,
  kBounds,
  kArgument,
  kConfig,
  kValidation,
  kParse,
  kIo,
  kFormat,
  kNumeric,
};

/// Base class of every error raised by the library. The kind drives the CLI
/// exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define GIST_DEFINE_ERROR(Name, Kind)                                        \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

GIST_DEFINE_ERROR(ShapeError, kShape)
GIST_DEFINE_ERROR(BoundsError, kBounds)
GIST_DEFINE_ERROR(ArgumentError, kArgument)
GIST_DEFINE_ERROR(ConfigError, kConfig)
GIST_DEFINE_ERROR(ValidationError, kValidation)
GIST_DEFINE_ERROR(ParseError, kParse)
GIST_DEFINE_ERROR(IoError, kIo)
GIST_DEFINE_ERROR(FormatError, kFormat)
GIST_DEFINE_ERROR(NumericError, kNumeric)

#undef GIST_DEFINE_ERROR

/// 0 success, 1 validation/config, 2 I/O or format, 3 numeric failure.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kParse:
      return 2;
    case ErrorKind::kNumeric:
      return 3;
    default:
      return 1;
  }
}

}  // namespace gist
