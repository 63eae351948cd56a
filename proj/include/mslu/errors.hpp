#pragma once

#include <stdexcept>
#include <string>

namespace mslu {

// Every failure raised by the library derives from Error; the kind() string is
// what the service reports as "error_kind".
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define MSLU_ERROR_KIND(Name, tag)                              \
  class Name : public Error {                                   \
   public:                                                      \
    using Error::Error;                                         \
    const char* kind() const noexcept override { return tag; }  \
  }

MSLU_ERROR_KIND(DimensionError, "dimension");
MSLU_ERROR_KIND(NumericalError, "numerical");
MSLU_ERROR_KIND(InputError, "input");
MSLU_ERROR_KIND(ParseError, "parse");
MSLU_ERROR_KIND(ValidationError, "validation");
MSLU_ERROR_KIND(VocabularyError, "vocabulary");
MSLU_ERROR_KIND(GenerationError, "generation");
MSLU_ERROR_KIND(IntegrityError, "integrity");
MSLU_ERROR_KIND(TransportError, "transport");
MSLU_ERROR_KIND(FormatError, "format");
MSLU_ERROR_KIND(NotFoundError, "not_found");
MSLU_ERROR_KIND(ConflictError, "conflict");
MSLU_ERROR_KIND(LimitError, "limit");
MSLU_ERROR_KIND(NotReadyError, "not_ready");

#undef MSLU_ERROR_KIND

}  // namespace mslu
