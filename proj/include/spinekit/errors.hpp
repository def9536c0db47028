#pragma once

#include <stdexcept>
#include <string>

namespace spinekit {

enum class ErrorCode {
  UnsupportedField,
  NotSquarefree,
  BothZero,
  NonIntegerInput,
  FieldMismatch,
  NotNormalized,
  EqualCusps,
  FitResidualExceeded,
  NewtonDiverged,
  DominatedTie,
  NoSecondCusp,
  NotOnTieSet,
  ResidualTooLarge,
  SingularBasis,
  NotObtuse,
  NotStrictlyObtuse,
  PreconditionViolated,
  CertificateViolated,
  IncidenceMissing,
  ParseError,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace spinekit
