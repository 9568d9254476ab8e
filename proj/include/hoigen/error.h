#ifndef HOIGEN_ERROR_H_
#define HOIGEN_ERROR_H_

#include <stdexcept>
#include <string>

namespace hoigen {

// Root of every error the library throws. Subclasses name the failure
// category so callers (notably the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HOIGEN_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

HOIGEN_DEFINE_ERROR(ParseError);
HOIGEN_DEFINE_ERROR(ValidationError);
HOIGEN_DEFINE_ERROR(IndexError);
HOIGEN_DEFINE_ERROR(InfeasibleSplit);
HOIGEN_DEFINE_ERROR(ShapeError);
HOIGEN_DEFINE_ERROR(BackendError);
HOIGEN_DEFINE_ERROR(ConfigError);
HOIGEN_DEFINE_ERROR(InsufficientFeatures);
HOIGEN_DEFINE_ERROR(EmptyDataset);
HOIGEN_DEFINE_ERROR(UnknownCategory);
HOIGEN_DEFINE_ERROR(MissingCategory);
HOIGEN_DEFINE_ERROR(MissingCounts);

#undef HOIGEN_DEFINE_ERROR

}  // namespace hoigen

#endif  // HOIGEN_ERROR_H_
