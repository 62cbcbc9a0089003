#pragma once

#include <stdexcept>
#include <string>

namespace lumpcheck {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model violates one of its structural invariants (symmetry, definiteness,
/// dimensions, connectivity).
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. `where` carries a line number or a JSON pointer.
class ParseError : public Error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(where), message_(what) {}
  const std::string& where() const { return where_; }
  /// The diagnostic without the location prefix.
  const std::string& message() const { return message_; }

 private:
  std::string where_;
  std::string message_;
};

/// (sE - A) could not be factored at the requested point.
class SingularSolveError : public Error {
 public:
  using Error::Error;
};

/// The pencil has an eigenvalue with nonnegative real part.
class UnstableSystemError : public Error {
 public:
  using Error::Error;
};

class InfiniteEnergyError : public Error {
 public:
  using Error::Error;
};

class IncomparableSourcesError : public Error {
 public:
  using Error::Error;
};

/// A reduced model failed its certification checks.
class ReductionError : public Error {
 public:
  using Error::Error;
};

/// The frequency-domain oracle did not converge within its budget.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

}  // namespace lumpcheck
