#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmp/bus.hpp"
#include "dmp/hdd.hpp"
#include "dmp/relay.hpp"
#include "dmp/streamhandler.hpp"

namespace dmp::harness {

struct Workload {
  std::int64_t entities_per_source = 0;
  /// When set, overrides entities_per_source and is spread round-robin.
  std::optional<std::int64_t> total_entities;
  std::int64_t inter_arrival_ms = 10;
  std::int64_t hop_latency_ms = 1;
  /// Probability of an extra delivery, applied both to edge publishes and to
  /// bus consumer batches (crash before commit).
  double duplicate_rate = 0.0;
  std::size_t consume_batch = 64;
  double verification_rate = 0.0;
  std::int64_t queries = 0;
  double span_fraction = 0.25;
};

struct FailureEvent {
  bus::SimTime at_ms = 0;
  bus::BrokerId broker = 0;
  bool fail = true;  // false: recover
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int edge_nodes = 1;
  int fog_nodes = 1;
  std::vector<av::AVSource> sources;
  Workload workload;
  bus::ClusterConfig cluster;
  int partitions_per_topic = 4;
  hdd::Constraints constraints;
  /// Optimizer consulted once before traffic starts; its plan is applied
  /// through the fusion store (expansion only).
  std::optional<hdd::Algorithm> optimizer;
  std::chrono::milliseconds segment_interval{10'000};
  std::vector<FailureEvent> failures;
  /// Hard stop for the simulated clock; 0 means last arrival + 10 minutes.
  bus::SimTime max_sim_ms = 0;
  relay::RuleSet rules = relay::RuleSet::defaults();
  std::optional<std::filesystem::path> store_path;
  std::optional<std::filesystem::path> archive_root;

  /// Throws Error(ConfigError) naming the offending field.
  void validate() const;
  static ScenarioConfig from_document(const Document& doc);
  static ScenarioConfig from_file(const std::filesystem::path& path);
};

struct MetricsReport {
  double data_loss_rate = 0.0;
  double availability = 1.0;
  double data_throughput_bytes_per_s = 0.0;  // simulated time
  double response_time_ms = 0.0;             // simulated read latency
  double data_transfer_latency_ms = 0.0;     // mean edge-publish to store
  int cluster_nodes = 0;
  std::int64_t open_handles = 0;
  double unavailability_ms = 0.0;

  std::int64_t entities_produced = 0;
  std::int64_t entities_stored = 0;
  std::int64_t entities_lost = 0;
  std::int64_t duplicates_injected = 0;
  std::int64_t duplicates_suppressed = 0;
  std::int64_t bus_replays = 0;
  std::int64_t requests = 0;
  std::int64_t failed_requests = 0;
  std::int64_t partitions_total = 0;
  std::int64_t segments = 0;
  std::int64_t av_bytes = 0;
  bus::SimTime sim_duration_ms = 0;
};

MetricsReport run_scenario(const ScenarioConfig& cfg);

struct ComparisonRequest {
  int brokers_min = 1;
  int brokers_max = 10;
  int replication = 2;
  hdd::Constraints constraints;
  bus::ClusterConfig calibration;
  std::vector<int> consumers{1};  // multiplies c1
  int seeds = 1000;
  std::uint64_t seed_base = 0;
};

struct ComparisonRow {
  int brokers = 0;
  int replication = 0;
  int consumers = 1;
  hdd::Algorithm algorithm = hdd::Algorithm::BroMax;
  int runs = 0;
  double partitions = 0.0;
  double latency_ms = 0.0;
  double brokers_used = 0.0;
  double open_handles = 0.0;
  std::int64_t violating_runs = 0;
  std::int64_t latency_violations = 0;
  std::string status = "ok";
};

std::vector<ComparisonRow> compare_optimizers(const ComparisonRequest& request);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const;
};

/// Shortest round-trip decimal form.
std::string format_number(double value);

CsvTable to_table(const MetricsReport& report);
CsvTable to_table(const std::vector<ComparisonRow>& rows);

/// Throws Error(IoFailure).
void emit_csv(const CsvTable& table, const std::filesystem::path& path);

std::string summarize(const MetricsReport& report);

}  // namespace dmp::harness
