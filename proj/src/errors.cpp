#include "faber/errors.hpp"

namespace faber {

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kParse: return "parse";
    case ErrorCategory::kVocabulary: return "vocabulary";
    case ErrorCategory::kOrder: return "order";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kType: return "type";
    case ErrorCategory::kCapacity: return "capacity";
    case ErrorCategory::kInfeasible: return "infeasible";
    case ErrorCategory::kSearchFailure: return "search-failure";
    case ErrorCategory::kLabel: return "label";
    case ErrorCategory::kStratification: return "stratification";
    case ErrorCategory::kSafety: return "safety";
    case ErrorCategory::kGeneration: return "generation";
    case ErrorCategory::kParameter: return "parameter";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

ParseError::ParseError(const std::string& message, int line, int column)
    : Error(ErrorCategory::kParse,
            "line " + std::to_string(line) +
                (column > 0 ? ", column " + std::to_string(column) : std::string()) + ": " +
                message),
      line_(line),
      column_(column) {}

}  // namespace faber
