#pragma once

#include <stdexcept>
#include <string>

namespace rlmpc {

/// q_evaluate found x outside CS^j while a policy was requested.
struct NotInSafeSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A scenario tree violates its structural or membership invariants.
struct TreeValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Every FTOCP instance of a control step is infeasible (x outside C^j).
struct AllInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Every extreme-state query of an ROA approximation was infeasible.
struct EmptyApproximation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A closed-loop guarantee failed at run time (e.g. infeasibility after t = 0).
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The iteration-0 controller could not steer x0 to O.
struct BootstrapFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A solver returned NumericalFailure; `dump` holds the offending program.
struct SolverFailure : std::runtime_error {
  SolverFailure(const std::string& what, std::string program_dump)
      : std::runtime_error(what), dump(std::move(program_dump)) {}
  std::string dump;
};

}  // namespace rlmpc
