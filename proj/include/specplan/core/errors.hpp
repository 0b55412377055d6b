#pragma once

#include <stdexcept>
#include <string>

namespace specplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPECPLAN_DECLARE_ERROR(Name)      \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

SPECPLAN_DECLARE_ERROR(EmptyAction);
SPECPLAN_DECLARE_ERROR(ConfigError);
SPECPLAN_DECLARE_ERROR(IoError);
SPECPLAN_DECLARE_ERROR(StepOutOfRange);
SPECPLAN_DECLARE_ERROR(PolicyFailure);
SPECPLAN_DECLARE_ERROR(LengthMismatch);
SPECPLAN_DECLARE_ERROR(MissingRun);
SPECPLAN_DECLARE_ERROR(HttpError);
SPECPLAN_DECLARE_ERROR(ParseError);

// Credential problems are a kind of HTTP failure but callers usually want to
// tell them apart (they are never worth retrying).
class AuthError : public HttpError {
 public:
  using HttpError::HttpError;
};

#undef SPECPLAN_DECLARE_ERROR

}  // namespace specplan
