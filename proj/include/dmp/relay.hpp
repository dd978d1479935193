#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "dmp/bus.hpp"
#include "dmp/entity.hpp"

namespace dmp::relay {

/// One predicate over a top-level payload field.
struct FieldPredicate {
  enum class Op { Equals, OneOf, IsNumber, Present };

  std::string field;
  Op op = Op::Present;
  Document operand;  // value for Equals, array for OneOf

  bool holds(const Document& payload) const;
};

struct ClassificationRule {
  FieldPredicate predicate;
  SdmKind kind = SdmKind::MediaEvent;
};

/// Ordered rules; the first whose predicate holds decides the kind, and
/// MediaEvent is the fallback.
class RuleSet {
 public:
  /// alert == true -> Alert; severity in {high, critical} -> Alert;
  /// anomaly_score is a number -> Anomaly.
  static RuleSet defaults();

  /// Array of {"field": ..., "equals"|"in"|"is": ..., "kind": ...}; "is"
  /// accepts "number" or "present". Throws Error(ConfigError).
  static RuleSet from_document(const Document& doc);

  explicit RuleSet(std::vector<ClassificationRule> rules) : rules_(std::move(rules)) {}

  SdmKind classify(const Document& payload) const;
  const std::vector<ClassificationRule>& rules() const { return rules_; }

 private:
  std::vector<ClassificationRule> rules_;
};

SdmKind classify_kind(const RawInferenceResult& raw, const RuleSet& rules = RuleSet::defaults());

/// Throws Error(MissingMandatoryField) naming result_id, av_source_id or
/// when.
SdmEntity transform(const RawInferenceResult& raw, Layer layer,
                    const RuleSet& rules = RuleSet::defaults());

/// Bus topic for each data model: "sdm.mediaevent", "sdm.alert", "sdm.anomaly".
std::string bus_topic_for(SdmKind kind);

/// DatAna instance for one layer. Entities whose result_id was already
/// forwarded by this node are suppressed.
class RelayNode {
 public:
  using Sink = std::function<void(const SdmEntity&)>;

  RelayNode(Layer layer, Sink downstream, RuleSet rules = RuleSet::defaults());

  Layer layer() const { return layer_; }
  const RuleSet& rules() const { return rules_; }

  /// Transforms a raw result produced at this node's layer and relays it.
  bool accept_raw(const RawInferenceResult& raw);
  /// Returns false for a duplicate result_id.
  bool relay(const SdmEntity& entity);

  std::size_t forwarded() const { return seen_.size(); }
  std::size_t suppressed() const { return suppressed_; }
  bool has_seen(const std::string& result_id) const { return seen_.contains(result_id); }

 private:
  Layer layer_;
  Sink downstream_;
  RuleSet rules_;
  std::unordered_set<std::string> seen_;
  std::size_t suppressed_ = 0;
};

/// Cloud-side handoff into the partitioned bus. Entities wait in an outbox
/// and are produced keyed by av_source_id into their kind's topic; a
/// partition without a leader holds back its entities (and only those) until
/// a later flush, so nothing is dropped and per-partition order is kept.
class BusProducer {
 public:
  void enqueue(const SdmEntity& entity);

  /// Returns the number of entities produced in this pass.
  std::size_t flush(bus::Cluster& cluster, bus::SimTime now);

  std::size_t backlog() const { return outbox_.size(); }
  std::size_t attempts() const { return attempts_; }
  std::size_t failures() const { return failures_; }

 private:
  std::deque<SdmEntity> outbox_;
  std::size_t attempts_ = 0;
  std::size_t failures_ = 0;
};

}  // namespace dmp::relay
