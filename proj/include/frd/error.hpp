#pragma once

#include <stdexcept>
#include <string>

namespace frd {

/// Base class for every error raised by the library. Carries the module and
/// operation that failed so front ends can report them verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string operation, const std::string& what)
      : std::runtime_error(module + "::" + operation + ": " + what),
        module_(std::move(module)),
        operation_(std::move(operation)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& operation() const noexcept { return operation_; }

 private:
  std::string module_;
  std::string operation_;
};

/// Precondition or input validation failure.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A torus kernel was requested whose range wraps around the torus (N <= 2t).
class WrapAroundError : public Error {
 public:
  using Error::Error;
};

/// Inverting an operator with a nontrivial kernel without deflation.
class SingularOperatorError : public Error {
 public:
  using Error::Error;
};

/// A scale block needed eigenvalue clipping beyond the permitted threshold.
class BlockQualityError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void require(bool ok, const char* module, const char* op,
                    const std::string& msg) {
  if (!ok) throw InvalidArgument(module, op, msg);
}
}  // namespace detail

}  // namespace frd
