#include "adviser/error.hpp"

namespace adviser {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedCatalog: return "MalformedCatalog";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::NoFeasibleInstance: return "NoFeasibleInstance";
    case ErrorCode::UnknownInstanceType: return "UnknownInstanceType";
    case ErrorCode::InfeasibleExplicitChoice: return "InfeasibleExplicitChoice";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::MissingParameter: return "MissingParameter";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::InsufficientSlots: return "InsufficientSlots";
    case ErrorCode::InvalidTransition: return "InvalidTransition";
    case ErrorCode::SetupFailed: return "SetupFailed";
    case ErrorCode::RunFailed: return "RunFailed";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::SimulatedStockout: return "SimulatedStockout";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::JobNotTerminal: return "JobNotTerminal";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::StoreFailure: return "StoreFailure";
    case ErrorCode::UnknownResource: return "UnknownResource";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::UnknownReservation: return "UnknownReservation";
    case ErrorCode::DoubleSettle: return "DoubleSettle";
    case ErrorCode::UnknownBudget: return "UnknownBudget";
    case ErrorCode::UnknownFlag: return "UnknownFlag";
    case ErrorCode::MissingFlagValue: return "MissingFlagValue";
    case ErrorCode::ConflictingCommandSources: return "ConflictingCommandSources";
    case ErrorCode::PermissionDenied: return "PermissionDenied";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(ErrorCode::InvalidArgument); ++i) {
    const auto c = static_cast<ErrorCode>(i);
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

int exit_code(ErrorCode code) noexcept {
  // 1 is left for unexpected failures.
  return 10 + static_cast<int>(code);
}

}  // namespace adviser
