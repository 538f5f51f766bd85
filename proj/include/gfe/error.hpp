#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gfe {

enum class ErrorCode {
  InvalidArgument,
  EmptyUnit,
  LocationDrift,
  NonFinite,
  NegativeWeight,
  UndefinedAlpha,
  NoObservations,
  NoFeasibleGroup,
  UnitObservedOnce,
  DegreesOfFreedomExhausted,
  NoScorableCells,
  MissingCovariates,
  UntaggedColumn,
  ZeroWeightCell,
  NoOverlap,
  InfeasibleRotation,
  ParseError,
  FilterEliminatedAll,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Violation {
  ErrorCode rule;
  std::string unit_id;
  long long period = 0;  // calendar period; 0 when the rule is unit-level
  std::string detail;
};

/// Raised by validate_dataset with every violated invariant, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

}  // namespace gfe
