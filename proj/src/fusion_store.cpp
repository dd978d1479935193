#include "dmp/fusion_store.hpp"

#include <array>
#include <mutex>

#include "dmp/error.hpp"

namespace dmp::fusion {

FusionStore::FusionStore(std::filesystem::path append_file) : path_(std::move(append_file)) {
  replay();
  log_.open(*path_, std::ios::binary | std::ios::app);
  if (!log_) throw Error(Errc::IoFailure, "cannot open " + path_->string());
}

void FusionStore::replay() {
  std::ifstream in(*path_, std::ios::binary);
  if (!in) return;  // fresh store
  std::size_t valid_bytes = 0;
  while (true) {
    std::array<unsigned char, 4> prefix{};
    in.read(reinterpret_cast<char*>(prefix.data()), prefix.size());
    if (in.gcount() != static_cast<std::streamsize>(prefix.size())) break;
    const std::uint32_t length = (std::uint32_t{prefix[0]} << 24) | (std::uint32_t{prefix[1]} << 16) |
                                 (std::uint32_t{prefix[2]} << 8) | std::uint32_t{prefix[3]};
    std::string bytes(length, '\0');
    in.read(bytes.data(), length);
    if (in.gcount() != static_cast<std::streamsize>(length)) break;
    const SdmEntity entity = deserialize_entity(bytes);
    // Later records for the same id carry verification updates.
    if (const auto it = by_id_.find(entity.result_id); it != by_id_.end()) {
      it->second = entity;
    } else {
      index(entity);
    }
    valid_bytes += prefix.size() + length;
  }
  in.close();
  if (std::filesystem::file_size(*path_) != valid_bytes) {
    std::filesystem::resize_file(*path_, valid_bytes);
  }
}

void FusionStore::append(const SdmEntity& entity) {
  if (!path_) return;
  const Bytes bytes = serialize_entity(entity);
  const auto length = static_cast<std::uint32_t>(bytes.size());
  const std::array<char, 4> prefix{static_cast<char>(length >> 24), static_cast<char>(length >> 16),
                                   static_cast<char>(length >> 8), static_cast<char>(length)};
  log_.write(prefix.data(), prefix.size());
  log_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  log_.flush();
  if (!log_) throw Error(Errc::IoFailure, "append to " + path_->string());
}

void FusionStore::index(const SdmEntity& entity) {
  TimeKey key{primary_time(entity.when), entity.result_id};
  by_time_.insert(key);
  by_source_[entity.av_source_id].insert(std::move(key));
  by_id_.emplace(entity.result_id, entity);
}

IngestOutcome FusionStore::ingest(const SdmEntity& entity) {
  std::unique_lock lock(mutex_);
  if (const auto it = by_id_.find(entity.result_id); it != by_id_.end()) {
    // A verified copy and a bus replay of the original are the same result.
    SdmEntity stored = it->second;
    stored.verified = entity.verified;
    if (stored == entity || it->second == entity) return IngestOutcome::Duplicate;
    throw Error(Errc::ConflictingEntity, entity.result_id);
  }
  append(entity);
  index(entity);
  return IngestOutcome::Inserted;
}

std::vector<SdmEntity> FusionStore::query(const Query& q) const {
  if (q.to < q.from) throw Error(Errc::InvalidRange, format_timestamp(q.from) + " > " + format_timestamp(q.to));
  std::shared_lock lock(mutex_);
  std::vector<SdmEntity> out;
  const std::set<TimeKey>* keys = &by_time_;
  if (q.source) {
    const auto it = by_source_.find(*q.source);
    if (it == by_source_.end()) return out;
    keys = &it->second;
  }
  for (auto it = keys->lower_bound({q.from, std::string{}}); it != keys->end(); ++it) {
    if (it->first > q.to) break;
    const SdmEntity& e = by_id_.at(it->second);
    if (q.kinds && !q.kinds->contains(e.kind)) continue;
    out.push_back(e);
  }
  return out;
}

SdmEntity FusionStore::apply_verification(const VerificationMessage& message) {
  std::unique_lock lock(mutex_);
  const auto it = by_id_.find(message.result_id);
  if (it == by_id_.end()) throw Error(Errc::UnknownResultId, message.result_id);
  SdmEntity updated = it->second;
  updated.verified = message.verdict == Verdict::Confirmed ? VerificationState::Confirmed
                                                           : VerificationState::Rejected;
  append(updated);
  it->second = updated;
  return updated;
}

std::optional<SdmEntity> FusionStore::find(const std::string& result_id) const {
  std::shared_lock lock(mutex_);
  const auto it = by_id_.find(result_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t FusionStore::size() const {
  std::shared_lock lock(mutex_);
  return by_id_.size();
}

std::vector<SdmEntity> FusionStore::all() const {
  std::shared_lock lock(mutex_);
  std::vector<SdmEntity> out;
  out.reserve(by_time_.size());
  for (const auto& key : by_time_) out.push_back(by_id_.at(key.second));
  return out;
}

bool FusionStore::consistent() const {
  std::shared_lock lock(mutex_);
  if (by_time_.size() != by_id_.size()) return false;
  std::size_t by_source_total = 0;
  for (const auto& [source, keys] : by_source_) {
    by_source_total += keys.size();
    for (const auto& key : keys) {
      const auto it = by_id_.find(key.second);
      if (it == by_id_.end() || it->second.av_source_id != source ||
          primary_time(it->second.when) != key.first || !by_time_.contains(key)) {
        return false;
      }
    }
  }
  if (by_source_total != by_id_.size()) return false;
  for (const auto& [id, entity] : by_id_) {
    if (!by_time_.contains({primary_time(entity.when), id})) return false;
  }
  return true;
}

PartitionReport report_partition_state(const FusionStore& /*store*/, const bus::Cluster& cluster) {
  PartitionReport report;
  for (const auto& [name, topic] : cluster.topics()) {
    report.topics[name] = {topic.partition_count(), topic.assignment()};
  }
  report.metrics = cluster.snapshot_metrics();
  return report;
}

bool apply_partition_recommendation(FusionStore& /*store*/, bus::Cluster& cluster,
                                    const hdd::PartitionPlan& plan, bus::SimTime now) {
  if (plan.partitions < 1) throw Error(Errc::InfeasiblePlan, "P < 1");
  if (plan.replication > plan.brokers) throw Error(Errc::InfeasiblePlan, "r > B");
  if (plan.brokers > cluster.config().brokers) {
    throw Error(Errc::InfeasiblePlan, "plan needs " + std::to_string(plan.brokers) +
                                          " brokers, cluster has " +
                                          std::to_string(cluster.config().brokers));
  }
  bool applied = false;
  std::vector<std::string> names;
  for (const auto& [name, topic] : cluster.topics()) names.push_back(name);
  for (const auto& name : names) {
    applied |= cluster.expand_topic(name, static_cast<int>(plan.partitions), now);
  }
  return applied;
}

}  // namespace dmp::fusion
