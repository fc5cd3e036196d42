#ifndef FWLS_ERROR_HPP
#define FWLS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fwls {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (index range, dimension agreement, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A value that must be finite was NaN or infinite.
class NonFiniteValue : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

/// The regularized normal equations could not be factored.
class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, double lambda)
      : Error(what), lambda_(lambda) {}
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

/// A Sherman-Morrison update had a vanishing denominator.
class DegenerateUpdate : public Error {
 public:
  using Error::Error;
};

/// Anything wrong with a state file on disk.
class StoreError : public Error {
 public:
  using Error::Error;
};
class BadMagic : public StoreError {
 public:
  using StoreError::StoreError;
};
class UnsupportedVersion : public StoreError {
 public:
  using StoreError::StoreError;
};
class CorruptFile : public StoreError {
 public:
  using StoreError::StoreError;
};

/// Row streams used for an extension do not line up with the stored state.
class AlignmentMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; line and column are 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace fwls

#endif  // FWLS_ERROR_HPP
