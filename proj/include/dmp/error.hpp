#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmp {

enum class Errc {
  MalformedTimestamp,
  NonUtcOffset,
  InvalidTimeSpan,
  MalformedDocument,
  MissingMandatoryField,
  InvalidTopic,
  InvalidFilter,
  DuplicateSubscription,
  UnknownSubscription,
  InvalidConfig,
  InvalidPartitionCount,
  InvalidReplication,
  UnknownTopic,
  UnknownPartition,
  PartitionUnavailable,
  UnknownBroker,
  TimeWentBackward,
  ConflictingEntity,
  InvalidRange,
  UnknownResultId,
  InfeasiblePlan,
  RegistryUnavailable,
  NonMonotonicTimestamps,
  UnknownSource,
  NoDataInRange,
  EmptyRange,
  Infeasible,
  ConfigError,
  IoFailure,
};

std::string_view to_string(Errc code) noexcept;

/// Every recoverable failure in the platform is reported as an Error carrying
/// a machine-checkable code. `detail()` holds the offending field name or
/// value where the error contract names one (e.g. MissingMandatoryField).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace dmp
