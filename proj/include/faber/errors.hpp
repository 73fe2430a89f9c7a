#pragma once

#include <stdexcept>
#include <string>

namespace faber {

// Error categories double as CLI exit codes.
enum class ErrorCategory : int {
  kParse = 2,
  kVocabulary = 3,
  kOrder = 4,
  kConfig = 5,
  kType = 6,
  kCapacity = 7,
  kInfeasible = 8,
  kSearchFailure = 9,
  kLabel = 10,
  kStratification = 11,
  kSafety = 12,
  kGeneration = 13,
  kParameter = 14,
  kIo = 15,
};

const char* to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column = 0);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

#define FABER_DEFINE_ERROR(Name, Category)                                \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(Category, message) {} \
  };

FABER_DEFINE_ERROR(VocabularyError, ErrorCategory::kVocabulary)
FABER_DEFINE_ERROR(OrderError, ErrorCategory::kOrder)
FABER_DEFINE_ERROR(ConfigError, ErrorCategory::kConfig)
FABER_DEFINE_ERROR(TypeError, ErrorCategory::kType)
FABER_DEFINE_ERROR(CapacityError, ErrorCategory::kCapacity)
FABER_DEFINE_ERROR(InfeasibleError, ErrorCategory::kInfeasible)
FABER_DEFINE_ERROR(SearchFailure, ErrorCategory::kSearchFailure)
FABER_DEFINE_ERROR(LabelError, ErrorCategory::kLabel)
FABER_DEFINE_ERROR(StratificationError, ErrorCategory::kStratification)
FABER_DEFINE_ERROR(SafetyError, ErrorCategory::kSafety)
FABER_DEFINE_ERROR(GenerationError, ErrorCategory::kGeneration)
FABER_DEFINE_ERROR(ParameterError, ErrorCategory::kParameter)
FABER_DEFINE_ERROR(IoError, ErrorCategory::kIo)

#undef FABER_DEFINE_ERROR

}  // namespace faber
