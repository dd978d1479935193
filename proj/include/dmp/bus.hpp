#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "dmp/entity.hpp"

namespace dmp::bus {

/// Simulated clock, milliseconds. Every cluster command carries the current
/// simulated time explicitly; the cluster never reads a wall clock.
using SimTime = std::int64_t;
using BrokerId = int;

struct ClusterConfig {
  int brokers = 1;
  int replication = 1;
  int handle_cost_per_replica = 2;
  double latency_base_ms = 1.0;       // c0
  double latency_per_load_ms = 0.01;  // c1
  double recovery_ms_per_partition = 10.0;  // c2

  /// Throws Error(InvalidConfig) for B < 1 or negative costs, and
  /// Error(InvalidReplication) for r < 1 or r > B.
  void validate() const;

  /// Keys: brokers, replication, latency_base_ms, latency_per_load_ms,
  /// handle_cost_per_replica, recovery_ms_per_partition. Missing keys keep
  /// their defaults; unknown keys are rejected.
  static ClusterConfig from_document(const Document& doc);
  Document to_document() const;
};

/// Per-message latency model: c0 + c1 * (P * r / B). B and r come from the
/// config; the config is not validated so optimizers can probe r > B.
double replication_latency(const ClusterConfig& cfg, std::int64_t partitions);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// FNV-1a 64 of the key, modulo P.
int partition_for_key(std::string_view key, int partitions);

/// Round-robin replica list for partition i: brokers (i + j) mod B, j < r.
std::vector<BrokerId> round_robin_replicas(int partition, int brokers, int replication);

struct Record {
  Bytes key;
  Bytes value;
  std::int64_t offset = 0;
  SimTime produced_at = 0;
};

struct PartitionState {
  std::vector<BrokerId> replicas;  // leader first at creation
  std::vector<std::vector<Record>> replica_logs;  // parallel to replicas
  std::optional<BrokerId> leader;
  std::optional<SimTime> election_at;
  std::optional<SimTime> leaderless_since;

  std::int64_t high_offset() const;
  /// Log of the current leader; empty view if the partition is leaderless.
  const std::vector<Record>* leader_log() const;
};

struct TopicState {
  std::string name;
  std::vector<PartitionState> partitions;

  int partition_count() const { return static_cast<int>(partitions.size()); }
  std::vector<std::vector<BrokerId>> assignment() const;
};

/// Fresh topic with round-robin placement, every replica alive and leader
/// replicas[0] = i mod B. Throws InvalidPartitionCount / InvalidReplication.
TopicState make_topic_state(const ClusterConfig& cfg, std::string name, int partitions);

struct ClusterMetrics {
  std::map<BrokerId, std::int64_t> open_handles_per_broker;
  double replication_latency_ms = 0.0;
  double unavailability_ms = 0.0;
  std::int64_t throughput_proxy = 0;

  std::int64_t total_open_handles() const;
};

struct ProduceResult {
  int partition = 0;
  std::int64_t offset = 0;
};

/// Deterministic Kafka-style cluster. Single-threaded by contract: drive one
/// instance from one thread, run independent instances in parallel.
class Cluster {
 public:
  explicit Cluster(ClusterConfig cfg);

  const ClusterConfig& config() const { return cfg_; }
  SimTime now() const { return now_; }

  const TopicState& create_topic(const std::string& name, int partitions, SimTime now);
  /// Adds partitions up to `partitions` (never removes). Returns true if any
  /// partition was added.
  bool expand_topic(const std::string& name, int partitions, SimTime now);

  const TopicState& topic(const std::string& name) const;
  const std::map<std::string, TopicState>& topics() const { return topics_; }
  bool has_topic(const std::string& name) const { return topics_.contains(name); }

  /// Keyed produce. Throws UnknownTopic or PartitionUnavailable when the
  /// target partition has no leader at `now`.
  ProduceResult produce(const std::string& topic, Bytes key, Bytes value, SimTime now);

  /// Returns records from the group's current position and advances the
  /// position, without committing.
  std::vector<Record> poll(const std::string& group, const std::string& topic, int partition,
                           std::size_t max, SimTime now);
  void commit(const std::string& group, const std::string& topic, int partition);
  /// Consumer crash before commit: the position falls back to the last
  /// committed offset so uncommitted records are delivered again.
  void rewind_to_committed(const std::string& group, const std::string& topic, int partition);
  /// poll followed by commit.
  std::vector<Record> consume(const std::string& group, const std::string& topic, int partition,
                              std::size_t max, SimTime now);

  std::int64_t committed_offset(const std::string& group, const std::string& topic,
                                int partition) const;
  std::int64_t position(const std::string& group, const std::string& topic, int partition) const;
  std::int64_t high_watermark(const std::string& topic, int partition) const;

  void fail_broker(BrokerId broker, SimTime now);
  void recover_broker(BrokerId broker, SimTime now);
  bool broker_alive(BrokerId broker) const;

  /// Processes leader elections due at or before `now`.
  void advance_to(SimTime now);
  /// Earliest pending election, if any.
  std::optional<SimTime> next_event_time() const;
  bool all_partitions_led() const;

  ClusterMetrics snapshot_metrics() const;

 private:
  struct Cursor {
    std::int64_t position = 0;
    std::int64_t committed = 0;
  };
  using CursorKey = std::tuple<std::string, std::string, int>;

  TopicState& mutable_topic(const std::string& name);
  PartitionState& mutable_partition(const std::string& topic, int partition);
  const PartitionState& partition_state(const std::string& topic, int partition) const;
  void check_broker(BrokerId broker) const;
  void elect(PartitionState& part, SimTime at);
  void resync(PartitionState& part, std::size_t replica_index);

  ClusterConfig cfg_;
  SimTime now_ = 0;
  std::vector<bool> alive_;
  std::map<std::string, TopicState> topics_;
  std::map<CursorKey, Cursor> cursors_;
  double unavailability_closed_ms_ = 0.0;
};

}  // namespace dmp::bus
