#include "dmp/bus.hpp"

#include <algorithm>

#include "dmp/error.hpp"

namespace dmp::bus {

namespace {

const std::vector<Record> kEmptyLog;

int int_field(const Document& doc, const char* key, int fallback) {
  const auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_number_integer()) throw Error(Errc::InvalidConfig, std::string(key) + " must be an integer");
  return it->get<int>();
}

double number_field(const Document& doc, const char* key, double fallback) {
  const auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_number()) throw Error(Errc::InvalidConfig, std::string(key) + " must be a number");
  return it->get<double>();
}

}  // namespace

void ClusterConfig::validate() const {
  if (brokers < 1) throw Error(Errc::InvalidConfig, "brokers must be >= 1");
  if (replication < 1 || replication > brokers) {
    throw Error(Errc::InvalidReplication, "replication " + std::to_string(replication) +
                                              " not in [1, " + std::to_string(brokers) + "]");
  }
  if (handle_cost_per_replica < 0 || latency_base_ms < 0 || latency_per_load_ms < 0 ||
      recovery_ms_per_partition < 0) {
    throw Error(Errc::InvalidConfig, "cost parameters must be non-negative");
  }
}

ClusterConfig ClusterConfig::from_document(const Document& doc) {
  if (!doc.is_object()) throw Error(Errc::InvalidConfig, "cluster config must be an object");
  static const std::vector<std::string> known{
      "brokers",          "replication",         "latency_base_ms", "latency_per_load_ms",
      "handle_cost_per_replica", "recovery_ms_per_partition"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::InvalidConfig, "unknown key " + key);
    }
  }
  ClusterConfig cfg;
  cfg.brokers = int_field(doc, "brokers", cfg.brokers);
  cfg.replication = int_field(doc, "replication", cfg.replication);
  cfg.handle_cost_per_replica = int_field(doc, "handle_cost_per_replica", cfg.handle_cost_per_replica);
  cfg.latency_base_ms = number_field(doc, "latency_base_ms", cfg.latency_base_ms);
  cfg.latency_per_load_ms = number_field(doc, "latency_per_load_ms", cfg.latency_per_load_ms);
  cfg.recovery_ms_per_partition =
      number_field(doc, "recovery_ms_per_partition", cfg.recovery_ms_per_partition);
  return cfg;
}

Document ClusterConfig::to_document() const {
  return {{"brokers", brokers},
          {"replication", replication},
          {"handle_cost_per_replica", handle_cost_per_replica},
          {"latency_base_ms", latency_base_ms},
          {"latency_per_load_ms", latency_per_load_ms},
          {"recovery_ms_per_partition", recovery_ms_per_partition}};
}

double replication_latency(const ClusterConfig& cfg, std::int64_t partitions) {
  const double load = static_cast<double>(partitions * cfg.replication) / cfg.brokers;
  return cfg.latency_base_ms + cfg.latency_per_load_ms * load;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

int partition_for_key(std::string_view key, int partitions) {
  if (partitions < 1) throw Error(Errc::InvalidPartitionCount, std::to_string(partitions));
  return static_cast<int>(fnv1a64(key) % static_cast<std::uint64_t>(partitions));
}

std::vector<BrokerId> round_robin_replicas(int partition, int brokers, int replication) {
  std::vector<BrokerId> replicas;
  replicas.reserve(replication);
  for (int j = 0; j < replication; ++j) replicas.push_back((partition + j) % brokers);
  return replicas;
}

std::int64_t PartitionState::high_offset() const {
  const auto* log = leader_log();
  if (log) return static_cast<std::int64_t>(log->size());
  std::size_t longest = 0;
  for (const auto& l : replica_logs) longest = std::max(longest, l.size());
  return static_cast<std::int64_t>(longest);
}

const std::vector<Record>* PartitionState::leader_log() const {
  if (!leader) return nullptr;
  for (std::size_t i = 0; i < replicas.size(); ++i) {
    if (replicas[i] == *leader) return &replica_logs[i];
  }
  return nullptr;
}

std::vector<std::vector<BrokerId>> TopicState::assignment() const {
  std::vector<std::vector<BrokerId>> out;
  out.reserve(partitions.size());
  for (const auto& p : partitions) out.push_back(p.replicas);
  return out;
}

namespace {

PartitionState fresh_partition(int index, const ClusterConfig& cfg) {
  PartitionState part;
  part.replicas = round_robin_replicas(index, cfg.brokers, cfg.replication);
  part.replica_logs.resize(part.replicas.size());
  part.leader = part.replicas.front();
  return part;
}

}  // namespace

TopicState make_topic_state(const ClusterConfig& cfg, std::string name, int partitions) {
  if (partitions < 1) throw Error(Errc::InvalidPartitionCount, std::to_string(partitions));
  cfg.validate();
  TopicState topic;
  topic.name = std::move(name);
  topic.partitions.reserve(partitions);
  for (int i = 0; i < partitions; ++i) topic.partitions.push_back(fresh_partition(i, cfg));
  return topic;
}

std::int64_t ClusterMetrics::total_open_handles() const {
  std::int64_t total = 0;
  for (const auto& [broker, handles] : open_handles_per_broker) total += handles;
  return total;
}

Cluster::Cluster(ClusterConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  alive_.assign(cfg_.brokers, true);
}

const TopicState& Cluster::create_topic(const std::string& name, int partitions, SimTime now) {
  advance_to(now);
  if (topics_.contains(name)) throw Error(Errc::InvalidConfig, "topic exists: " + name);
  TopicState topic = make_topic_state(cfg_, name, partitions);
  for (auto& part : topic.partitions) {
    if (!alive_[*part.leader]) {
      part.leader.reset();
      part.leaderless_since = now_;
      elect(part, now_);
    }
  }
  return topics_.emplace(name, std::move(topic)).first->second;
}

bool Cluster::expand_topic(const std::string& name, int partitions, SimTime now) {
  advance_to(now);
  if (partitions < 1) throw Error(Errc::InvalidPartitionCount, std::to_string(partitions));
  auto& topic = mutable_topic(name);
  if (partitions <= topic.partition_count()) return false;
  for (int i = topic.partition_count(); i < partitions; ++i) {
    auto part = fresh_partition(i, cfg_);
    if (!alive_[*part.leader]) {
      part.leader.reset();
      part.leaderless_since = now_;
      elect(part, now_);
    }
    topic.partitions.push_back(std::move(part));
  }
  return true;
}

const TopicState& Cluster::topic(const std::string& name) const {
  const auto it = topics_.find(name);
  if (it == topics_.end()) throw Error(Errc::UnknownTopic, name);
  return it->second;
}

TopicState& Cluster::mutable_topic(const std::string& name) {
  const auto it = topics_.find(name);
  if (it == topics_.end()) throw Error(Errc::UnknownTopic, name);
  return it->second;
}

PartitionState& Cluster::mutable_partition(const std::string& topic, int partition) {
  auto& t = mutable_topic(topic);
  if (partition < 0 || partition >= t.partition_count()) {
    throw Error(Errc::UnknownPartition, topic + "/" + std::to_string(partition));
  }
  return t.partitions[partition];
}

const PartitionState& Cluster::partition_state(const std::string& topic, int partition) const {
  const auto& t = this->topic(topic);
  if (partition < 0 || partition >= t.partition_count()) {
    throw Error(Errc::UnknownPartition, topic + "/" + std::to_string(partition));
  }
  return t.partitions[partition];
}

ProduceResult Cluster::produce(const std::string& topic, Bytes key, Bytes value, SimTime now) {
  advance_to(now);
  auto& t = mutable_topic(topic);
  const int index = partition_for_key(key, t.partition_count());
  auto& part = t.partitions[index];
  if (!part.leader) {
    throw Error(Errc::PartitionUnavailable, topic + "/" + std::to_string(index));
  }
  Record record{std::move(key), std::move(value), part.high_offset(), now_};
  // Synchronous replication to every live replica; dead ones resync on recovery.
  for (std::size_t i = 0; i < part.replicas.size(); ++i) {
    if (alive_[part.replicas[i]]) part.replica_logs[i].push_back(record);
  }
  return {index, record.offset};
}

std::vector<Record> Cluster::poll(const std::string& group, const std::string& topic,
                                  int partition, std::size_t max, SimTime now) {
  advance_to(now);
  const auto& part = partition_state(topic, partition);
  auto& cursor = cursors_[{group, topic, partition}];
  std::vector<Record> out;
  const auto* log = part.leader_log();
  if (!log) return out;
  auto pos = static_cast<std::size_t>(std::min<std::int64_t>(cursor.position, log->size()));
  while (pos < log->size() && out.size() < max) out.push_back((*log)[pos++]);
  cursor.position = static_cast<std::int64_t>(pos);
  return out;
}

void Cluster::commit(const std::string& group, const std::string& topic, int partition) {
  partition_state(topic, partition);
  auto& cursor = cursors_[{group, topic, partition}];
  cursor.committed = cursor.position;
}

void Cluster::rewind_to_committed(const std::string& group, const std::string& topic,
                                  int partition) {
  partition_state(topic, partition);
  auto& cursor = cursors_[{group, topic, partition}];
  cursor.position = cursor.committed;
}

std::vector<Record> Cluster::consume(const std::string& group, const std::string& topic,
                                     int partition, std::size_t max, SimTime now) {
  auto records = poll(group, topic, partition, max, now);
  commit(group, topic, partition);
  return records;
}

std::int64_t Cluster::committed_offset(const std::string& group, const std::string& topic,
                                       int partition) const {
  partition_state(topic, partition);
  const auto it = cursors_.find({group, topic, partition});
  return it == cursors_.end() ? 0 : it->second.committed;
}

std::int64_t Cluster::position(const std::string& group, const std::string& topic,
                               int partition) const {
  partition_state(topic, partition);
  const auto it = cursors_.find({group, topic, partition});
  return it == cursors_.end() ? 0 : it->second.position;
}

std::int64_t Cluster::high_watermark(const std::string& topic, int partition) const {
  return partition_state(topic, partition).high_offset();
}

void Cluster::check_broker(BrokerId broker) const {
  if (broker < 0 || broker >= cfg_.brokers) throw Error(Errc::UnknownBroker, std::to_string(broker));
}

bool Cluster::broker_alive(BrokerId broker) const {
  check_broker(broker);
  return alive_[broker];
}

void Cluster::fail_broker(BrokerId broker, SimTime now) {
  check_broker(broker);
  advance_to(now);
  if (!alive_[broker]) return;
  alive_[broker] = false;

  std::int64_t led = 0;
  for (const auto& [name, topic] : topics_) {
    for (const auto& part : topic.partitions) led += part.leader == broker;
  }
  const auto delay = static_cast<SimTime>(cfg_.recovery_ms_per_partition * static_cast<double>(led));

  for (auto& [name, topic] : topics_) {
    for (auto& part : topic.partitions) {
      if (part.leader != broker) continue;
      part.leader.reset();
      part.leaderless_since = now_;
      part.election_at = now_ + delay;
    }
  }
  advance_to(now_);
}

void Cluster::resync(PartitionState& part, std::size_t replica_index) {
  const std::vector<Record>* source = part.leader_log();
  if (!source) {
    for (std::size_t i = 0; i < part.replicas.size(); ++i) {
      if (i == replica_index || !alive_[part.replicas[i]]) continue;
      if (!source || part.replica_logs[i].size() > source->size()) source = &part.replica_logs[i];
    }
  }
  if (source && source != &part.replica_logs[replica_index]) {
    part.replica_logs[replica_index] = *source;
  }
}

void Cluster::recover_broker(BrokerId broker, SimTime now) {
  check_broker(broker);
  advance_to(now);
  if (alive_[broker]) return;
  alive_[broker] = true;
  for (auto& [name, topic] : topics_) {
    for (auto& part : topic.partitions) {
      for (std::size_t i = 0; i < part.replicas.size(); ++i) {
        if (part.replicas[i] != broker) continue;
        resync(part, i);
        // A partition with no live replica and no pending election gets its
        // leader back as soon as any replica returns.
        if (!part.leader && !part.election_at) elect(part, now_);
      }
    }
  }
}

void Cluster::elect(PartitionState& part, SimTime at) {
  part.election_at.reset();
  for (std::size_t i = 0; i < part.replicas.size(); ++i) {
    if (!alive_[part.replicas[i]]) continue;
    part.leader = part.replicas[i];
    if (part.leaderless_since) {
      unavailability_closed_ms_ += static_cast<double>(at - *part.leaderless_since);
      part.leaderless_since.reset();
    }
    return;
  }
  // No live replica: stays leaderless until a replica broker recovers.
}

void Cluster::advance_to(SimTime now) {
  if (now < now_) {
    throw Error(Errc::TimeWentBackward, std::to_string(now) + " < " + std::to_string(now_));
  }
  // Elections complete in time order so a broker failing in between is seen.
  while (true) {
    const auto next = next_event_time();
    if (!next || *next > now) break;
    for (auto& [name, topic] : topics_) {
      for (auto& part : topic.partitions) {
        if (part.election_at == next) elect(part, *next);
      }
    }
  }
  now_ = now;
}

std::optional<SimTime> Cluster::next_event_time() const {
  std::optional<SimTime> earliest;
  for (const auto& [name, topic] : topics_) {
    for (const auto& part : topic.partitions) {
      if (part.election_at && (!earliest || *part.election_at < *earliest)) earliest = part.election_at;
    }
  }
  return earliest;
}

bool Cluster::all_partitions_led() const {
  for (const auto& [name, topic] : topics_) {
    for (const auto& part : topic.partitions) {
      if (!part.leader) return false;
    }
  }
  return true;
}

ClusterMetrics Cluster::snapshot_metrics() const {
  ClusterMetrics m;
  for (BrokerId b = 0; b < cfg_.brokers; ++b) m.open_handles_per_broker[b] = 0;
  double open_windows = 0.0;
  for (const auto& [name, topic] : topics_) {
    m.throughput_proxy += topic.partition_count();
    for (const auto& part : topic.partitions) {
      for (const BrokerId b : part.replicas) m.open_handles_per_broker[b] += cfg_.handle_cost_per_replica;
      if (part.leaderless_since) open_windows += static_cast<double>(now_ - *part.leaderless_since);
    }
  }
  m.replication_latency_ms = replication_latency(cfg_, m.throughput_proxy);
  m.unavailability_ms = unavailability_closed_ms_ + open_windows;
  return m;
}

}  // namespace dmp::bus
