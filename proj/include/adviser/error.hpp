#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace adviser {

// One code per error class. The CLI maps each code to a distinct exit status
// and the HTTP layer maps it to a status code plus the code name.
enum class ErrorCode {
  MalformedCatalog,
  DuplicateEntry,
  NoFeasibleInstance,
  UnknownInstanceType,
  InfeasibleExplicitChoice,
  ValidationFailed,
  UnknownParameter,
  TypeMismatch,
  MissingParameter,
  UnknownTemplate,
  InsufficientSlots,
  InvalidTransition,
  SetupFailed,
  RunFailed,
  Timeout,
  SimulatedStockout,
  Underdetermined,
  JobNotTerminal,
  InsufficientSamples,
  StoreFailure,
  UnknownResource,
  BudgetExhausted,
  UnknownReservation,
  DoubleSettle,
  UnknownBudget,
  UnknownFlag,
  MissingFlagValue,
  ConflictingCommandSources,
  PermissionDenied,
  UnknownJob,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;
// Inverse of to_string; empty for unrecognised names.
std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept;

// Exit status used by the CLI for a given error class (always >= 2).
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace adviser
