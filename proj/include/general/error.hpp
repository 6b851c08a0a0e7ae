#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace general {

enum class Errc {
  // input validation
  MissingColumn,
  NonNumericCell,
  EmptyFile,
  InvalidSchema,
  InvalidLabel,
  InvalidEffort,
  EmptyTable,
  TooFewProjects,
  TooFewRows,
  TooFewFeatures,
  SeriesTooShort,
  UnknownGoal,
  DimensionMismatch,
  EmptyInput,
  LevelOutOfRange,
  ConstantLabel,
  SingleClass,
  MinorityTooSmall,
  InvalidBounds,
  LengthMismatch,
  NoDefects,
  ZeroEffort,
  GoalMismatch,
  EmptyCluster,
  InconsistentSizes,
  UnfittedModel,
  InvalidConfig,
  // runtime
  Io,
  BadFormat,
  LeakageDetected,
};

std::string_view errc_name(Errc code);

/// True for error kinds caused by bad user input (CLI exit code 1).
bool is_validation_error(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace general
