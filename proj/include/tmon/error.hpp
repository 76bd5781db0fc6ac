#pragma once

#include <stdexcept>
#include <string>

namespace tmon {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TMON_DEFINE_ERROR(Name) \
  class Name : public Error {   \
   public:                      \
    using Error::Error;         \
  }

TMON_DEFINE_ERROR(BoundsError);
TMON_DEFINE_ERROR(FormatError);
TMON_DEFINE_ERROR(ValidationError);
TMON_DEFINE_ERROR(ShapeError);
TMON_DEFINE_ERROR(InvalidTransformError);
TMON_DEFINE_ERROR(InsufficientDataError);
TMON_DEFINE_ERROR(RankError);
TMON_DEFINE_ERROR(DegenerateMaskError);
TMON_DEFINE_ERROR(DataError);
TMON_DEFINE_ERROR(ConfigError);
TMON_DEFINE_ERROR(IoError);

#undef TMON_DEFINE_ERROR

}  // namespace tmon
