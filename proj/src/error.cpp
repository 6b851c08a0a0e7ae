#include "general/error.hpp"

namespace general {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::NonNumericCell: return "NonNumericCell";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::InvalidSchema: return "InvalidSchema";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::InvalidEffort: return "InvalidEffort";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::TooFewProjects: return "TooFewProjects";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::TooFewFeatures: return "TooFewFeatures";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::UnknownGoal: return "UnknownGoal";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LevelOutOfRange: return "LevelOutOfRange";
    case Errc::ConstantLabel: return "ConstantLabel";
    case Errc::SingleClass: return "SingleClass";
    case Errc::MinorityTooSmall: return "MinorityTooSmall";
    case Errc::InvalidBounds: return "InvalidBounds";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NoDefects: return "NoDefects";
    case Errc::ZeroEffort: return "ZeroEffort";
    case Errc::GoalMismatch: return "GoalMismatch";
    case Errc::EmptyCluster: return "EmptyCluster";
    case Errc::InconsistentSizes: return "InconsistentSizes";
    case Errc::UnfittedModel: return "UnfittedModel";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
    case Errc::BadFormat: return "BadFormat";
    case Errc::LeakageDetected: return "LeakageDetected";
  }
  return "Unknown";
}

bool is_validation_error(Errc code) {
  switch (code) {
    case Errc::Io:
    case Errc::LeakageDetected:
      return false;
    default:
      return true;
  }
}

}  // namespace general
