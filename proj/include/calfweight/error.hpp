#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace calfweight {

enum class ErrorKind {
  // image primitives
  ChannelMismatch,
  EmptyContour,
  EmptyMask,
  DegeneratePolygon,
  // loaders
  SchemaError,
  ParseError,
  ConsistencyError,
  DuplicateRecord,
  ShapeError,
  PairMismatch,
  DuplicateLabel,
  IoError,
  MissingWeight,
  // pipeline and statistics
  InvalidParams,
  NoValidDepth,
  InsufficientGroups,
  InsufficientRows,
  InsufficientSeries,
  DegenerateInput,
  DegenerateTarget,
  InvalidTarget,
  InvalidK,
  LabelMismatch,
  // model fitting
  RankDeficient,
  VarianceNotIdentifiable,
  FitDiverged,
  NumericalError,
  // front end
  ConfigError,
  UsageError,
};

enum class ErrorCategory { Usage = 1, Data = 2, Numerical = 3 };

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ChannelMismatch: return "ChannelMismatch";
    case ErrorKind::EmptyContour: return "EmptyContour";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConsistencyError: return "ConsistencyError";
    case ErrorKind::DuplicateRecord: return "DuplicateRecord";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::PairMismatch: return "PairMismatch";
    case ErrorKind::DuplicateLabel: return "DuplicateLabel";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::MissingWeight: return "MissingWeight";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::NoValidDepth: return "NoValidDepth";
    case ErrorKind::InsufficientGroups: return "InsufficientGroups";
    case ErrorKind::InsufficientRows: return "InsufficientRows";
    case ErrorKind::InsufficientSeries: return "InsufficientSeries";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DegenerateTarget: return "DegenerateTarget";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::LabelMismatch: return "LabelMismatch";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::VarianceNotIdentifiable: return "VarianceNotIdentifiable";
    case ErrorKind::FitDiverged: return "FitDiverged";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Unknown";
}

constexpr ErrorCategory category(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::UsageError:
    case ErrorKind::InvalidParams:
      return ErrorCategory::Usage;
    case ErrorKind::RankDeficient:
    case ErrorKind::VarianceNotIdentifiable:
    case ErrorKind::FitDiverged:
    case ErrorKind::NumericalError:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

/// Every failure raised by the library carries a machine-readable kind and an
/// optional subject (file, column, calf id, ...) naming what was at fault.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string subject = {})
      : std::runtime_error(compose(kind, message, subject)),
        kind_(kind),
        subject_(std::move(subject)),
        detail_(std::move(message)) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string& subject() const noexcept { return subject_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

  /// Re-raise with extra context prepended, e.g. "repeat 3, fold 2".
  [[nodiscard]] Error with_context(std::string_view context) const {
    return Error(kind_, std::string(context) + ": " + detail_, subject_);
  }

 private:
  static std::string compose(ErrorKind kind, const std::string& message, const std::string& subject) {
    std::string out(to_string(kind));
    if (!subject.empty()) out += "(" + subject + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorKind kind_;
  std::string subject_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string message, std::string subject = {}) {
  throw Error(kind, std::move(message), std::move(subject));
}

}  // namespace calfweight
