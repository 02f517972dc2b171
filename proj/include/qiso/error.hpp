#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qiso {

/// Coarse failure class, mapped onto CLI exit codes.
enum class ErrorCategory { usage, numerical, verification };

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string code, const std::string& what)
      : std::runtime_error(what), category_(category), code_(std::move(code)) {}

  ErrorCategory category() const noexcept { return category_; }
  /// Short machine-readable identifier, e.g. "parse_error".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorCategory category_;
  std::string code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : Error(ErrorCategory::usage, "parse_error",
              what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// An expression is undefined somewhere on [0,1].
class DomainError : public Error {
 public:
  DomainError(double x, const std::string& what)
      : Error(ErrorCategory::usage, "domain_error",
              what + " near x=" + std::to_string(x)),
        x_(x) {}
  double x() const noexcept { return x_; }

 private:
  double x_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCategory::usage, "invalid_argument", what) {}
};

/// Any failure of a numerical procedure (integration, root bracketing,
/// quadrature, positivity of Darboux data, ...).
class NumericalError : public Error {
 public:
  NumericalError(std::string code, const std::string& what)
      : Error(ErrorCategory::numerical, std::move(code), what) {}
};

class IntegrationError : public NumericalError {
 public:
  IntegrationError(double x, const std::string& what)
      : NumericalError("integration_error", what + " at x=" + std::to_string(x)),
        x_(x) {}
  double x() const noexcept { return x_; }

 private:
  double x_;
};

}  // namespace qiso
