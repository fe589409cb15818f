#pragma once

#include <stdexcept>
#include <string>

namespace fdakrig {

/// Failure categories. The CLI maps Validation to exit code 2 and
/// Numerical to exit code 3.
enum class ErrorKind { Validation, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

struct DependencyError : Error {
  explicit DependencyError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

struct UnmodeledYearError : Error {
  explicit UnmodeledYearError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct NotPositiveDefiniteError : Error {
  NotPositiveDefiniteError(const std::string& w, long pivot)
      : Error(ErrorKind::Numerical, w), pivot_index(pivot) {}
  long pivot_index;
};

struct PatternMismatchError : Error {
  PatternMismatchError(const std::string& w, long r, long c)
      : Error(ErrorKind::Numerical, w), row(r), col(c) {}
  long row;
  long col;
};

struct DegenerateSmoothingError : Error {
  explicit DegenerateSmoothingError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct LikelihoodError : Error {
  explicit LikelihoodError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct FitFailure : Error {
  explicit FitFailure(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct SizeError : Error {
  explicit SizeError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

}  // namespace fdakrig
