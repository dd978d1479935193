#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmp/bus.hpp"
#include "dmp/entity.hpp"
#include "dmp/hdd.hpp"

namespace dmp::fusion {

enum class IngestOutcome { Inserted, Duplicate };

struct Query {
  std::optional<std::string> source;
  Timestamp from;
  Timestamp to;
  std::optional<std::set<SdmKind>> kinds;
};

/// Archive of SDM entities indexed by id, by primary timestamp and by
/// source. Mutations are serialized; queries take a shared lock and see a
/// consistent point-in-time view.
///
/// When opened on a path, every accepted mutation is appended as a
/// length-prefixed record (4-byte big-endian length, then the canonical
/// entity bytes). Reopening replays the file; a torn final record is
/// dropped.
class FusionStore {
 public:
  FusionStore() = default;
  explicit FusionStore(std::filesystem::path append_file);

  FusionStore(const FusionStore&) = delete;
  FusionStore& operator=(const FusionStore&) = delete;

  /// Throws Error(ConflictingEntity) if the id is stored with other content.
  IngestOutcome ingest(const SdmEntity& entity);

  /// Inclusive range on primary timestamp; ascending by (timestamp,
  /// result_id). Throws Error(InvalidRange) if from > to.
  std::vector<SdmEntity> query(const Query& q) const;

  /// Last writer wins. Throws Error(UnknownResultId).
  SdmEntity apply_verification(const VerificationMessage& message);

  std::optional<SdmEntity> find(const std::string& result_id) const;
  std::size_t size() const;
  std::vector<SdmEntity> all() const;

  /// True when the three indexes describe the same entity set.
  bool consistent() const;

 private:
  using TimeKey = std::pair<Timestamp, std::string>;

  void index(const SdmEntity& entity);
  void append(const SdmEntity& entity);
  void replay();

  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, SdmEntity> by_id_;
  std::set<TimeKey> by_time_;
  std::map<std::string, std::set<TimeKey>> by_source_;

  std::optional<std::filesystem::path> path_;
  std::ofstream log_;
};

struct TopicPartitioning {
  int partitions = 0;
  std::vector<std::vector<bus::BrokerId>> assignment;
};

struct PartitionReport {
  std::map<std::string, TopicPartitioning> topics;
  bus::ClusterMetrics metrics;
};

PartitionReport report_partition_state(const FusionStore& store, const bus::Cluster& cluster);

/// Expands every topic to plan.partitions. Returns false when no topic grew.
/// Throws Error(InfeasiblePlan) for P < 1, r > B, or a plan needing more
/// brokers than the cluster has.
bool apply_partition_recommendation(FusionStore& store, bus::Cluster& cluster,
                                    const hdd::PartitionPlan& plan, bus::SimTime now);

}  // namespace dmp::fusion
