#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace morticast {

/// Broad failure class; the CLI maps these onto its exit codes.
enum class ErrorCategory { Config, Data, Numeric };

enum class ErrorKind {
  // ingest
  MalformedRow,
  RaggedYear,
  EmptyFile,
  MissingCell,
  WindowOutOfRange,
  GridMismatch,
  NegativeCount,
  // improvement
  NonpositiveRate,
  TooFewYears,
  UnsortedBreaks,
  // sampler
  NonFiniteDensityAtInit,
  AllProposalsRejected,
  UnknownParameter,
  InvalidConfig,
  // models
  NonFiniteData,
  DegenerateRegression,
  NonContiguousHorizon,
  // blend
  ShapeMismatch,
  EmptyReferences,
  // life table
  RhoGeqOne,
  YearMismatch,
  // diagnostics
  ZeroVariance,
  SeriesTooShort,
  DegenerateBinarization,
  // harness
  ConfigInvalid,
  HorizonMismatch,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::RaggedYear: return "RaggedYear";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::MissingCell: return "MissingCell";
    case ErrorKind::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::NegativeCount: return "NegativeCount";
    case ErrorKind::NonpositiveRate: return "NonpositiveRate";
    case ErrorKind::TooFewYears: return "TooFewYears";
    case ErrorKind::UnsortedBreaks: return "UnsortedBreaks";
    case ErrorKind::NonFiniteDensityAtInit: return "NonFiniteDensityAtInit";
    case ErrorKind::AllProposalsRejected: return "AllProposalsRejected";
    case ErrorKind::UnknownParameter: return "UnknownParameter";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NonFiniteData: return "NonFiniteData";
    case ErrorKind::DegenerateRegression: return "DegenerateRegression";
    case ErrorKind::NonContiguousHorizon: return "NonContiguousHorizon";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyReferences: return "EmptyReferences";
    case ErrorKind::RhoGeqOne: return "RhoGeqOne";
    case ErrorKind::YearMismatch: return "YearMismatch";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::SeriesTooShort: return "SeriesTooShort";
    case ErrorKind::DegenerateBinarization: return "DegenerateBinarization";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::HorizonMismatch: return "HorizonMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

constexpr ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::InvalidConfig:
    case ErrorKind::UnknownParameter:
    case ErrorKind::UnsortedBreaks:
      return ErrorCategory::Config;
    case ErrorKind::NonFiniteDensityAtInit:
    case ErrorKind::AllProposalsRejected:
    case ErrorKind::DegenerateRegression:
    case ErrorKind::RhoGeqOne:
    case ErrorKind::ZeroVariance:
    case ErrorKind::DegenerateBinarization:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace morticast
