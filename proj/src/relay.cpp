#include "dmp/relay.hpp"

#include <set>
#include <utility>

#include "dmp/error.hpp"

namespace dmp::relay {

bool FieldPredicate::holds(const Document& payload) const {
  if (!payload.is_object()) return false;
  const auto it = payload.find(field);
  if (it == payload.end()) return false;
  switch (op) {
    case Op::Equals: return *it == operand;
    case Op::OneOf:
      for (const auto& candidate : operand) {
        if (*it == candidate) return true;
      }
      return false;
    case Op::IsNumber: return it->is_number();
    case Op::Present: return true;
  }
  return false;
}

RuleSet RuleSet::defaults() {
  using Op = FieldPredicate::Op;
  return RuleSet({
      {{"alert", Op::Equals, true}, SdmKind::Alert},
      {{"severity", Op::OneOf, Document::array({"high", "critical"})}, SdmKind::Alert},
      {{"anomaly_score", Op::IsNumber, nullptr}, SdmKind::Anomaly},
  });
}

RuleSet RuleSet::from_document(const Document& doc) {
  using Op = FieldPredicate::Op;
  if (!doc.is_array()) throw Error(Errc::ConfigError, "rules must be an array");
  std::vector<ClassificationRule> rules;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("field") || !entry["field"].is_string() ||
        !entry.contains("kind") || !entry["kind"].is_string()) {
      throw Error(Errc::ConfigError, "rules[" + std::to_string(rules.size()) + "]");
    }
    ClassificationRule rule;
    rule.predicate.field = entry["field"].get<std::string>();
    try {
      rule.kind = parse_kind(entry["kind"].get<std::string>());
    } catch (const Error&) {
      throw Error(Errc::ConfigError, "rules[" + std::to_string(rules.size()) + "].kind");
    }
    if (entry.contains("equals")) {
      rule.predicate.op = Op::Equals;
      rule.predicate.operand = entry["equals"];
    } else if (entry.contains("in") && entry["in"].is_array()) {
      rule.predicate.op = Op::OneOf;
      rule.predicate.operand = entry["in"];
    } else if (entry.value("is", "") == "number") {
      rule.predicate.op = Op::IsNumber;
    } else if (entry.value("is", "") == "present") {
      rule.predicate.op = Op::Present;
    } else {
      throw Error(Errc::ConfigError, "rules[" + std::to_string(rules.size()) + "] has no predicate");
    }
    rules.push_back(std::move(rule));
  }
  return RuleSet(std::move(rules));
}

SdmKind RuleSet::classify(const Document& payload) const {
  for (const auto& rule : rules_) {
    if (rule.predicate.holds(payload)) return rule.kind;
  }
  return SdmKind::MediaEvent;
}

SdmKind classify_kind(const RawInferenceResult& raw, const RuleSet& rules) {
  return rules.classify(raw.payload);
}

SdmEntity transform(const RawInferenceResult& raw, Layer layer, const RuleSet& rules) {
  if (raw.result_id.empty()) throw Error(Errc::MissingMandatoryField, "result_id");
  if (raw.av_source_id.empty()) throw Error(Errc::MissingMandatoryField, "av_source_id");
  if (!raw.when) throw Error(Errc::MissingMandatoryField, "when");

  SdmEntity e;
  e.kind = classify_kind(raw, rules);
  e.result_id = raw.result_id;
  e.av_source_id = raw.av_source_id;
  e.when = *raw.when;
  e.origin_layer = layer;
  e.verified = VerificationState::Unset;
  e.attributes = raw.payload.is_object() ? raw.payload : Document::object();
  return e;
}

std::string bus_topic_for(SdmKind kind) {
  switch (kind) {
    case SdmKind::MediaEvent: return "sdm.mediaevent";
    case SdmKind::Alert: return "sdm.alert";
    case SdmKind::Anomaly: return "sdm.anomaly";
  }
  return "sdm.mediaevent";
}

RelayNode::RelayNode(Layer layer, Sink downstream, RuleSet rules)
    : layer_(layer), downstream_(std::move(downstream)), rules_(std::move(rules)) {}

bool RelayNode::accept_raw(const RawInferenceResult& raw) {
  return relay(transform(raw, layer_, rules_));
}

bool RelayNode::relay(const SdmEntity& entity) {
  if (!seen_.insert(entity.result_id).second) {
    ++suppressed_;
    return false;
  }
  if (downstream_) downstream_(entity);
  return true;
}

void BusProducer::enqueue(const SdmEntity& entity) { outbox_.push_back(entity); }

std::size_t BusProducer::flush(bus::Cluster& cluster, bus::SimTime now) {
  std::set<std::pair<std::string, int>> blocked;
  std::deque<SdmEntity> held;
  std::size_t produced = 0;
  while (!outbox_.empty()) {
    SdmEntity entity = std::move(outbox_.front());
    outbox_.pop_front();
    const std::string topic = bus_topic_for(entity.kind);
    const int partition =
        bus::partition_for_key(entity.av_source_id, cluster.topic(topic).partition_count());
    if (blocked.contains({topic, partition})) {
      held.push_back(std::move(entity));
      continue;
    }
    ++attempts_;
    try {
      cluster.produce(topic, entity.av_source_id, serialize_entity(entity), now);
      ++produced;
    } catch (const Error& err) {
      if (err.code() != Errc::PartitionUnavailable) throw;
      ++failures_;
      blocked.emplace(topic, partition);
      held.push_back(std::move(entity));
    }
  }
  outbox_ = std::move(held);
  return produced;
}

}  // namespace dmp::relay
