#pragma once

#include <stdexcept>
#include <string>

namespace tracelam {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownDistError : Error {
  using Error::Error;
};
struct UnknownPrimError : Error {
  using Error::Error;
};
struct ArityMismatchError : Error {
  using Error::Error;
};
struct InvalidParamsError : Error {
  using Error::Error;
};
struct OpenTermError : Error {
  using Error::Error;
};

struct ParseError : Error {
  int line;
  int column;
  ParseError(const std::string& msg, int line_, int column_)
      : Error(msg + " (line " + std::to_string(line_) + ", column " +
              std::to_string(column_) + ")"),
        line(line_),
        column(column_) {}
};

// Unbound identifiers, unsupported forms, shadowing of builtins.
struct TranslateError : Error {
  using Error::Error;
};

struct InitFailureError : Error {
  using Error::Error;
};
struct RetryExhaustedError : Error {
  using Error::Error;
};
// A chain was requested for a model that consumes no randomness.
struct DeterministicModelError : Error {
  using Error::Error;
};

struct KindMismatchError : Error {
  using Error::Error;
};
struct DomainMismatchError : Error {
  using Error::Error;
};

}  // namespace tracelam
