#include "regio/error.hpp"

namespace regio {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DuplicateCode: return "DuplicateCode";
    case ErrorKind::UnknownLevel: return "UnknownLevel";
    case ErrorKind::DanglingParent: return "DanglingParent";
    case ErrorKind::ParentWrongLevel: return "ParentWrongLevel";
    case ErrorKind::CountryMismatch: return "CountryMismatch";
    case ErrorKind::Cycle: return "Cycle";
    case ErrorKind::UnknownRegion: return "UnknownRegion";
    case ErrorKind::TargetCoarserThanSource: return "TargetCoarserThanSource";
    case ErrorKind::TargetFinerThanSource: return "TargetFinerThanSource";
    case ErrorKind::NoAncestor: return "NoAncestor";
    case ErrorKind::DuplicateRegion: return "DuplicateRegion";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::NonNumericValue: return "NonNumericValue";
    case ErrorKind::MalformedCsv: return "MalformedCsv";
    case ErrorKind::MissingValues: return "MissingValues";
    case ErrorKind::LevelMismatch: return "LevelMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewValues: return "TooFewValues";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnresolvedVariable: return "UnresolvedVariable";
    case ErrorKind::NegativeProxyValue: return "NegativeProxyValue";
    case ErrorKind::NegativeCap: return "NegativeCap";
    case ErrorKind::NoPredictors: return "NoPredictors";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::UndefinedR2: return "UndefinedR2";
    case ErrorKind::MissingFeature: return "MissingFeature";
    case ErrorKind::InvalidHyperParams: return "InvalidHyperParams";
    case ErrorKind::EmptyChildSet: return "EmptyChildSet";
    case ErrorKind::InvalidWeight: return "InvalidWeight";
    case ErrorKind::MissingSourceValue: return "MissingSourceValue";
    case ErrorKind::UnresolvedDependency: return "UnresolvedDependency";
    case ErrorKind::DependencyCycle: return "DependencyCycle";
    case ErrorKind::DuplicateOutput: return "DuplicateOutput";
    case ErrorKind::InvalidTask: return "InvalidTask";
    case ErrorKind::UndefinedDeviation: return "UndefinedDeviation";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace regio
