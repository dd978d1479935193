#include <doctest.h>

#include <set>

#include "dmp/error.hpp"
#include "dmp/relay.hpp"

using namespace dmp;
using namespace dmp::relay;

namespace {

RawInferenceResult raw_result(const std::string& source, int i, Document payload = Document::object()) {
  RawInferenceResult raw;
  raw.av_source_id = source;
  raw.result_id = source + "-" + std::to_string(i);
  raw.producer = "video-analyzer";
  raw.when = Timestamp::from_unix_ms(1'673'740'800'000 + i);
  raw.payload = std::move(payload);
  return raw;
}

}  // namespace

TEST_CASE("default classification") {
  const auto rules = RuleSet::defaults();
  CHECK(rules.classify({{"severity", "critical"}, {"label", "crowd"}}) == SdmKind::Alert);
  CHECK(rules.classify({{"anomaly_score", 0.93}}) == SdmKind::Anomaly);
  CHECK(rules.classify({{"label", "bicycle"}, {"confidence", 0.8}}) == SdmKind::MediaEvent);
  CHECK(rules.classify({{"alert", true}}) == SdmKind::Alert);
  CHECK(rules.classify({{"anomaly_score", "high"}}) == SdmKind::MediaEvent);
  CHECK(rules.classify({{"severity", "low"}}) == SdmKind::MediaEvent);
}

TEST_CASE("rule documents") {
  const auto rules = RuleSet::from_document(Document::parse(R"([
    {"field": "label", "equals": "siren", "kind": "Alert"},
    {"field": "score", "is": "number", "kind": "Anomaly"}])"));
  CHECK(rules.classify({{"label", "siren"}}) == SdmKind::Alert);
  CHECK(rules.classify({{"score", 3}}) == SdmKind::Anomaly);
  CHECK(rules.classify({{"label", "car"}}) == SdmKind::MediaEvent);
  CHECK_THROWS_AS(RuleSet::from_document(Document::parse(R"([{"field": "x", "kind": "Alert"}])")), Error);
  CHECK_THROWS_AS(RuleSet::from_document(Document::parse(R"({"field": "x"})")), Error);
}

TEST_CASE("transform") {
  const auto raw = raw_result("cam1", 1, {{"label", "car"}});
  const auto e = transform(raw, Layer::Edge);
  CHECK(e.result_id == raw.result_id);
  CHECK(e.av_source_id == "cam1");
  CHECK(e.origin_layer == Layer::Edge);
  CHECK(e.when == *raw.when);
  CHECK(e.attributes == raw.payload);

  auto spanned = raw;
  const auto start = Timestamp::from_unix_ms(100);
  spanned.when = TimeSpan(start, start.plus_ms(1234));
  CHECK(std::get<TimeSpan>(transform(spanned, Layer::Edge).when) == TimeSpan(start, start.plus_ms(1234)));

  for (const char* field : {"av_source_id", "result_id", "when"}) {
    auto broken = raw;
    if (std::string(field) == "av_source_id") broken.av_source_id.clear();
    if (std::string(field) == "result_id") broken.result_id.clear();
    if (std::string(field) == "when") broken.when.reset();
    try {
      transform(broken, Layer::Edge);
      FAIL("accepted");
    } catch (const Error& err) {
      CHECK(err.code() == Errc::MissingMandatoryField);
      CHECK(err.detail() == field);
    }
  }
}

TEST_CASE("relay dedup and chain delivery") {
  std::vector<SdmEntity> at_cloud;
  RelayNode cloud(Layer::Cloud, [&](const SdmEntity& e) { at_cloud.push_back(e); });
  RelayNode fog(Layer::Fog, [&](const SdmEntity& e) { cloud.relay(e); });
  RelayNode edge(Layer::Edge, [&](const SdmEntity& e) { fog.relay(e); });

  const auto raw = raw_result("cam1", 7);
  CHECK(edge.accept_raw(raw));
  CHECK_FALSE(edge.accept_raw(raw));
  CHECK(edge.suppressed() == 1);
  REQUIRE(at_cloud.size() == 1);
  CHECK(at_cloud[0].origin_layer == Layer::Edge);
  CHECK(cloud.has_seen(raw.result_id));
}

TEST_CASE("1000 entities from 3 sources reach the bus exactly once, in source order") {
  bus::ClusterConfig cfg;
  cfg.brokers = 3;
  cfg.replication = 2;
  bus::Cluster cluster(cfg);
  for (const auto kind : {SdmKind::MediaEvent, SdmKind::Alert, SdmKind::Anomaly}) {
    cluster.create_topic(bus_topic_for(kind), 4, 0);
  }
  BusProducer producer;
  RelayNode cloud(Layer::Cloud, [&](const SdmEntity& e) { producer.enqueue(e); });
  RelayNode fog(Layer::Fog, [&](const SdmEntity& e) { cloud.relay(e); });
  std::vector<std::unique_ptr<RelayNode>> edges;
  for (int i = 0; i < 2; ++i) {
    edges.push_back(std::make_unique<RelayNode>(Layer::Edge, [&](const SdmEntity& e) { fog.relay(e); }));
  }

  const std::vector<std::string> sources{"cam1", "cam2", "mic1"};
  std::map<std::string, std::vector<std::string>> sent;
  for (int i = 0; i < 1000; ++i) {
    const auto& src = sources[static_cast<std::size_t>(i % 3)];
    Document payload = Document::object();
    if (i % 7 == 0) payload["alert"] = true;
    if (i % 11 == 0) payload["anomaly_score"] = 0.5;
    auto raw = raw_result(src, i, payload);
    auto& edge = *edges[static_cast<std::size_t>(i % 2)];
    edge.accept_raw(raw);
    if (i % 10 == 0) edge.accept_raw(raw);  // redelivery at the edge
    sent[src].push_back(raw.result_id);
    if (i == 500) cluster.fail_broker(1, 5);
    producer.flush(cluster, i < 500 ? 0 : 5 + i);
  }
  while (producer.backlog() > 0) {
    const auto t = cluster.next_event_time().value_or(cluster.now() + 1);
    producer.flush(cluster, t);
  }

  std::set<std::string> ids;
  std::size_t records = 0;
  std::map<std::string, std::vector<std::string>> received;
  for (const auto& [name, topic] : cluster.topics()) {
    for (int p = 0; p < topic.partition_count(); ++p) {
      for (const auto& rec : cluster.consume("check", name, p, 100000, cluster.now())) {
        const auto e = deserialize_entity(rec.value);
        ids.insert(e.result_id);
        received[e.av_source_id + "/" + name].push_back(e.result_id);
        ++records;
      }
    }
  }
  CHECK(records == 1000);
  CHECK(ids.size() == 1000);
  // Within each (source, kind topic) stream the edge order survives.
  for (const auto& [stream, got] : received) {
    const auto source = stream.substr(0, stream.find('/'));
    std::vector<std::string> expected;
    std::set<std::string> in_stream(got.begin(), got.end());
    for (const auto& id : sent[source]) {
      if (in_stream.contains(id)) expected.push_back(id);
    }
    CHECK(got == expected);
  }
}
