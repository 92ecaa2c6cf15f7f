#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace regio {

enum class ErrorKind {
  // hierarchy
  DuplicateCode,
  UnknownLevel,
  DanglingParent,
  ParentWrongLevel,
  CountryMismatch,
  Cycle,
  UnknownRegion,
  TargetCoarserThanSource,
  TargetFinerThanSource,
  NoAncestor,
  // series
  DuplicateRegion,
  NonFiniteValue,
  NonNumericValue,
  MalformedCsv,
  MissingValues,
  LevelMismatch,
  LengthMismatch,
  TooFewValues,
  // proxy expressions
  SyntaxError,
  UnresolvedVariable,
  NegativeProxyValue,
  NegativeCap,
  // imputation
  NoPredictors,
  InsufficientData,
  UndefinedR2,
  MissingFeature,
  InvalidHyperParams,
  // disaggregation
  EmptyChildSet,
  InvalidWeight,
  MissingSourceValue,
  UnresolvedDependency,
  DependencyCycle,
  DuplicateOutput,
  InvalidTask,
  // validation
  UndefinedDeviation,
  NoOverlap,
  // config / io
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace regio
