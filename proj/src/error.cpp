#include "dmp/error.hpp"

namespace dmp {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedTimestamp: return "MalformedTimestamp";
    case Errc::NonUtcOffset: return "NonUtcOffset";
    case Errc::InvalidTimeSpan: return "InvalidTimeSpan";
    case Errc::MalformedDocument: return "MalformedDocument";
    case Errc::MissingMandatoryField: return "MissingMandatoryField";
    case Errc::InvalidTopic: return "InvalidTopic";
    case Errc::InvalidFilter: return "InvalidFilter";
    case Errc::DuplicateSubscription: return "DuplicateSubscription";
    case Errc::UnknownSubscription: return "UnknownSubscription";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidPartitionCount: return "InvalidPartitionCount";
    case Errc::InvalidReplication: return "InvalidReplication";
    case Errc::UnknownTopic: return "UnknownTopic";
    case Errc::UnknownPartition: return "UnknownPartition";
    case Errc::PartitionUnavailable: return "PartitionUnavailable";
    case Errc::UnknownBroker: return "UnknownBroker";
    case Errc::TimeWentBackward: return "TimeWentBackward";
    case Errc::ConflictingEntity: return "ConflictingEntity";
    case Errc::InvalidRange: return "InvalidRange";
    case Errc::UnknownResultId: return "UnknownResultId";
    case Errc::InfeasiblePlan: return "InfeasiblePlan";
    case Errc::RegistryUnavailable: return "RegistryUnavailable";
    case Errc::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case Errc::UnknownSource: return "UnknownSource";
    case Errc::NoDataInRange: return "NoDataInRange";
    case Errc::EmptyRange: return "EmptyRange";
    case Errc::Infeasible: return "Infeasible";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

namespace {
std::string compose(Errc code, const std::string& detail) {
  std::string msg{to_string(code)};
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}
}  // namespace

Error::Error(Errc code, std::string detail)
    : std::runtime_error(compose(code, detail)), code_(code), detail_(std::move(detail)) {}

}  // namespace dmp
