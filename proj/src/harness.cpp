#include "dmp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "dmp/error.hpp"
#include "dmp/fusion_store.hpp"
#include "dmp/pubsub.hpp"

namespace dmp::harness {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& why = {}) {
  throw Error(Errc::ConfigError, why.empty() ? field : field + ": " + why);
}

template <typename T>
T get_field(const Document& doc, const char* key, T fallback, const std::string& path) {
  const auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(path + key, "wrong type");
  }
}

// Every sub-parser reports problems as ConfigError carrying the field path.
template <typename F>
auto parse_section(const std::string& field, F&& parse) -> decltype(parse()) {
  try {
    return parse();
  } catch (const Error& err) {
    if (err.code() == Errc::ConfigError) throw;
    config_error(field, err.what());
  } catch (const nlohmann::json::exception& err) {
    config_error(field, err.what());
  }
}

constexpr std::string_view kConsumerGroup = "dfb";

// 2023-01-15T00:00:00.000Z; simulated time 0 maps here.
const Timestamp kEpoch = Timestamp::from_unix_ms(1673740800000);

struct Arrival {
  bus::SimTime at = 0;
  std::size_t source = 0;
  std::int64_t index = 0;
};

struct InFlight {
  bus::SimTime deliver_at = 0;
  SdmEntity entity;
};

using Channel = std::deque<InFlight>;

RawInferenceResult synth_raw(const av::AVSource& source, std::int64_t index, bus::SimTime at,
                             double span_fraction, hdd::Rng& rng) {
  static const std::vector<std::string> video_labels{"person", "crowd", "bicycle", "car", "bus"};
  static const std::vector<std::string> audio_labels{"speech", "siren", "horn", "scream", "music"};
  const bool camera = source.kind == av::SourceKind::Camera;
  const auto& labels = camera ? video_labels : audio_labels;

  RawInferenceResult raw;
  raw.av_source_id = source.source_id;
  raw.result_id = source.source_id + "-" + std::to_string(index);
  raw.producer = camera ? "video-analyzer" : "audio-analyzer";
  const Timestamp start = kEpoch.plus_ms(at);
  if (rng.unit() < span_fraction) {
    raw.when = TimeSpan(start, start.plus_ms(rng.uniform(100, 2000)));
  } else {
    raw.when = start;
  }
  raw.payload["label"] = labels[static_cast<std::size_t>(rng.uniform(0, labels.size() - 1))];
  raw.payload["confidence"] = static_cast<double>(rng.uniform(500, 999)) / 1000.0;
  const double roll = rng.unit();
  if (roll < 0.05) {
    raw.payload["alert"] = true;
  } else if (roll < 0.15) {
    raw.payload["severity"] = rng.unit() < 0.5 ? "high" : "critical";
  } else if (roll < 0.30) {
    raw.payload["anomaly_score"] = static_cast<double>(rng.uniform(0, 1000)) / 1000.0;
  }
  return raw;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (edge_nodes < 0) config_error("layers.edge_nodes", "must be >= 0");
  if (fog_nodes < 0) config_error("layers.fog_nodes", "must be >= 0");
  if (!sources.empty() && edge_nodes < 1) config_error("layers.edge_nodes", "sources need an edge node");
  if (!sources.empty() && fog_nodes < 1) config_error("layers.fog_nodes", "sources need a fog node");
  if (workload.entities_per_source < 0) config_error("workload.entities_per_source", "must be >= 0");
  if (workload.total_entities && *workload.total_entities < 0) {
    config_error("workload.total_entities", "must be >= 0");
  }
  if (workload.inter_arrival_ms < 0) config_error("workload.inter_arrival_ms", "must be >= 0");
  if (workload.hop_latency_ms < 0) config_error("workload.hop_latency_ms", "must be >= 0");
  if (!(workload.duplicate_rate >= 0 && workload.duplicate_rate < 1)) {
    config_error("workload.duplicate_rate", "must be in [0, 1)");
  }
  if (workload.consume_batch < 1) config_error("workload.consume_batch", "must be >= 1");
  if (!(workload.verification_rate >= 0 && workload.verification_rate <= 1)) {
    config_error("workload.verification_rate", "must be in [0, 1]");
  }
  if (workload.queries < 0) config_error("workload.queries", "must be >= 0");
  if (!(workload.span_fraction >= 0 && workload.span_fraction <= 1)) {
    config_error("workload.span_fraction", "must be in [0, 1]");
  }
  parse_section("cluster", [&] {
    cluster.validate();
    return 0;
  });
  if (partitions_per_topic < 1) config_error("partitions_per_topic", "must be >= 1");
  parse_section("constraints", [&] {
    constraints.validate();
    return 0;
  });
  if (segment_interval.count() <= 0) config_error("segment_interval_s", "must be positive");
  bus::SimTime last = 0;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    const auto field = "failures[" + std::to_string(i) + "]";
    if (failures[i].at_ms < last) config_error(field + ".at_ms", "schedule must be non-decreasing");
    if (failures[i].broker < 0 || failures[i].broker >= cluster.brokers) {
      config_error(field + ".broker", "unknown broker");
    }
    last = failures[i].at_ms;
  }
  if (max_sim_ms < 0) config_error("max_sim_ms", "must be >= 0");
  std::vector<std::string> ids;
  for (const auto& s : sources) ids.push_back(s.source_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) config_error("sources", "duplicate id");
}

ScenarioConfig ScenarioConfig::from_document(const Document& doc) {
  if (!doc.is_object()) config_error("<root>", "must be an object");
  ScenarioConfig cfg;
  cfg.seed = get_field<std::uint64_t>(doc, "seed", cfg.seed, "");

  if (const auto it = doc.find("layers"); it != doc.end()) {
    cfg.edge_nodes = get_field<int>(*it, "edge_nodes", cfg.edge_nodes, "layers.");
    cfg.fog_nodes = get_field<int>(*it, "fog_nodes", cfg.fog_nodes, "layers.");
  }

  if (const auto it = doc.find("sources"); it != doc.end()) {
    if (!it->is_array()) config_error("sources", "must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& s = (*it)[i];
      const auto path = "sources[" + std::to_string(i) + "].";
      if (!s.is_object() || !s.contains("id")) config_error(path + "id", "missing");
      av::AVSource src;
      src.source_id = get_field<std::string>(s, "id", "", path);
      const auto kind = get_field<std::string>(s, "kind", "camera", path);
      if (kind == "camera") {
        src.kind = av::SourceKind::Camera;
      } else if (kind == "microphone") {
        src.kind = av::SourceKind::Microphone;
      } else {
        config_error(path + "kind", "camera or microphone");
      }
      src.rate_bytes_per_s = get_field<std::int64_t>(s, "rate_bytes_per_s", 0, path);
      src.active = get_field<bool>(s, "active", true, path);
      if (src.source_id.empty() || src.source_id.find_first_of("/+#") != std::string::npos) {
        config_error(path + "id", "must be a non-empty topic level");
      }
      if (src.rate_bytes_per_s < 0) config_error(path + "rate_bytes_per_s", "must be >= 0");
      cfg.sources.push_back(std::move(src));
    }
  }

  if (const auto it = doc.find("workload"); it != doc.end()) {
    auto& w = cfg.workload;
    const std::string p = "workload.";
    w.entities_per_source = get_field<std::int64_t>(*it, "entities_per_source", w.entities_per_source, p);
    if (it->contains("total_entities")) {
      w.total_entities = get_field<std::int64_t>(*it, "total_entities", 0, p);
    }
    w.inter_arrival_ms = get_field<std::int64_t>(*it, "inter_arrival_ms", w.inter_arrival_ms, p);
    w.hop_latency_ms = get_field<std::int64_t>(*it, "hop_latency_ms", w.hop_latency_ms, p);
    w.duplicate_rate = get_field<double>(*it, "duplicate_rate", w.duplicate_rate, p);
    w.consume_batch = get_field<std::size_t>(*it, "consume_batch", w.consume_batch, p);
    w.verification_rate = get_field<double>(*it, "verification_rate", w.verification_rate, p);
    w.queries = get_field<std::int64_t>(*it, "queries", w.queries, p);
    w.span_fraction = get_field<double>(*it, "span_fraction", w.span_fraction, p);
  }

  if (const auto it = doc.find("cluster"); it != doc.end()) {
    cfg.cluster = parse_section("cluster", [&] { return bus::ClusterConfig::from_document(*it); });
  }
  cfg.partitions_per_topic = get_field<int>(doc, "partitions_per_topic", cfg.partitions_per_topic, "");
  if (const auto it = doc.find("constraints"); it != doc.end()) {
    cfg.constraints = parse_section("constraints", [&] { return hdd::Constraints::from_document(*it); });
  }
  if (const auto it = doc.find("optimizer"); it != doc.end() && !it->is_null()) {
    cfg.optimizer = parse_section("optimizer", [&] {
      return hdd::parse_algorithm(get_field<std::string>(doc, "optimizer", "", ""));
    });
  }
  if (doc.contains("segment_interval_s")) {
    const double seconds = get_field<double>(doc, "segment_interval_s", 10.0, "");
    cfg.segment_interval = std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(seconds * 1000)));
  }
  if (const auto it = doc.find("failures"); it != doc.end()) {
    if (!it->is_array()) config_error("failures", "must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& f = (*it)[i];
      const auto path = "failures[" + std::to_string(i) + "].";
      FailureEvent ev;
      ev.at_ms = get_field<bus::SimTime>(f, "at_ms", 0, path);
      ev.broker = get_field<int>(f, "broker", 0, path);
      const auto action = get_field<std::string>(f, "action", "fail", path);
      if (action != "fail" && action != "recover") config_error(path + "action", "fail or recover");
      ev.fail = action == "fail";
      cfg.failures.push_back(ev);
    }
  }
  cfg.max_sim_ms = get_field<bus::SimTime>(doc, "max_sim_ms", cfg.max_sim_ms, "");
  if (const auto it = doc.find("rules"); it != doc.end()) {
    cfg.rules = parse_section("rules", [&] { return relay::RuleSet::from_document(*it); });
  }
  if (doc.contains("store_path")) cfg.store_path = get_field<std::string>(doc, "store_path", "", "");
  if (doc.contains("archive_root")) cfg.archive_root = get_field<std::string>(doc, "archive_root", "", "");

  static const std::vector<std::string> known{
      "seed",        "layers",     "sources",  "registry",   "workload", "cluster",
      "partitions_per_topic", "constraints", "optimizer", "segment_interval_s", "failures",
      "max_sim_ms",  "rules",      "store_path", "archive_root"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) config_error(key, "unknown key");
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot read " + path.string());
  Document doc = Document::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::ConfigError, path.string() + ": not valid JSON");
  const auto base = path.parent_path();
  // Registry and output paths are relative to the config file.
  if (const auto it = doc.find("registry"); it != doc.end()) {
    if (!it->is_string()) config_error("registry", "must be a path");
    auto registry = fs::path(it->get<std::string>());
    if (registry.is_relative()) registry = base / registry;
    const auto all = parse_section("registry", [&] {
      return av::parse_registry([&] {
        std::ifstream r(registry);
        if (!r) throw Error(Errc::RegistryUnavailable, registry.string());
        std::ostringstream buf;
        buf << r.rdbuf();
        return buf.str();
      }());
    });
    Document sources = doc.value("sources", Document::array());
    for (const auto& s : av::discover_sources(std::span<const av::AVSource>(all))) {
      sources.push_back({{"id", s.source_id},
                         {"kind", av::to_string(s.kind)},
                         {"rate_bytes_per_s", s.rate_bytes_per_s},
                         {"active", true}});
    }
    doc["sources"] = sources;
  }
  for (const char* key : {"store_path", "archive_root"}) {
    if (const auto it = doc.find(key); it != doc.end() && it->is_string()) {
      const fs::path p(it->get<std::string>());
      if (p.is_relative()) *it = (base / p).string();
    }
  }
  return from_document(doc);
}

MetricsReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto& w = cfg.workload;
  hdd::Rng rng(cfg.seed);
  MetricsReport report;

  // --- arrivals ---------------------------------------------------------
  std::vector<std::int64_t> per_source(cfg.sources.size(), w.entities_per_source);
  if (w.total_entities && !cfg.sources.empty()) {
    const auto n = static_cast<std::int64_t>(cfg.sources.size());
    for (std::size_t i = 0; i < per_source.size(); ++i) {
      per_source[i] = *w.total_entities / n + (static_cast<std::int64_t>(i) < *w.total_entities % n);
    }
  }
  std::vector<Arrival> arrivals;
  for (std::size_t s = 0; s < cfg.sources.size(); ++s) {
    for (std::int64_t j = 0; j < per_source[s]; ++j) {
      arrivals.push_back({j * w.inter_arrival_ms + static_cast<bus::SimTime>(s), s, j});
    }
  }
  std::stable_sort(arrivals.begin(), arrivals.end(),
                   [](const Arrival& a, const Arrival& b) { return a.at < b.at; });
  const bus::SimTime last_arrival = arrivals.empty() ? 0 : arrivals.back().at;
  const bus::SimTime deadline = cfg.max_sim_ms > 0 ? cfg.max_sim_ms : last_arrival + 600'000;

  // --- cluster and store -------------------------------------------------
  bus::Cluster cluster(cfg.cluster);
  for (const auto kind : {SdmKind::MediaEvent, SdmKind::Alert, SdmKind::Anomaly}) {
    cluster.create_topic(relay::bus_topic_for(kind), cfg.partitions_per_topic, 0);
  }
  std::unique_ptr<fusion::FusionStore> store =
      cfg.store_path ? std::make_unique<fusion::FusionStore>(*cfg.store_path)
                     : std::make_unique<fusion::FusionStore>();

  if (cfg.optimizer) {
    const auto state = fusion::report_partition_state(*store, cluster);
    const int brokers = cfg.cluster.brokers;
    const int r = cfg.cluster.replication;
    hdd::PartitionPlan plan;
    switch (*cfg.optimizer) {
      case hdd::Algorithm::MsCnfl: plan = hdd::ms_cnfl(brokers, r, rng, cfg.cluster); break;
      case hdd::Algorithm::BroMax: plan = hdd::bro_max(brokers, r, cfg.constraints, cfg.cluster); break;
      case hdd::Algorithm::BroMin: {
        // Fewest brokers for the partitions currently applied per topic.
        const auto current = state.topics.begin()->second.partitions;
        plan = hdd::bro_min(current, r, cfg.constraints, cfg.cluster);
        break;
      }
    }
    // The recommendation is per topic; a plan on fewer brokers than the
    // cluster still expands partitions over the whole cluster.
    fusion::apply_partition_recommendation(*store, cluster, plan, 0);
  }

  // --- relay chain --------------------------------------------------------
  relay::BusProducer producer;
  relay::RelayNode cloud(Layer::Cloud, [&](const SdmEntity& e) { producer.enqueue(e); }, cfg.rules);

  std::vector<Channel> fog_to_cloud(cfg.fog_nodes);
  bus::SimTime now = 0;
  std::vector<std::unique_ptr<relay::RelayNode>> fogs;
  for (int f = 0; f < cfg.fog_nodes; ++f) {
    fogs.push_back(std::make_unique<relay::RelayNode>(
        Layer::Fog,
        [&, f](const SdmEntity& e) { fog_to_cloud[f].push_back({now + w.hop_latency_ms, e}); },
        cfg.rules));
  }

  struct EdgeSite {
    pubsub::EdgeBroker broker;
    pubsub::SubscriptionHandle subscription = 0;
    std::unique_ptr<relay::RelayNode> node;
    Channel to_fog;
    int fog = 0;
  };
  std::vector<std::unique_ptr<EdgeSite>> edges;
  for (int e = 0; e < cfg.edge_nodes; ++e) {
    auto site = std::make_unique<EdgeSite>();
    site->fog = cfg.fog_nodes > 0 ? e % cfg.fog_nodes : 0;
    site->subscription = site->broker.subscribe(pubsub::TopicFilter::parse("inference/edge/#"),
                                                "datana-edge-" + std::to_string(e));
    auto* raw_site = site.get();
    site->node = std::make_unique<relay::RelayNode>(
        Layer::Edge,
        [&, raw_site](const SdmEntity& ent) { raw_site->to_fog.push_back({now + w.hop_latency_ms, ent}); },
        cfg.rules);
    edges.push_back(std::move(site));
  }

  // --- simulation loop ------------------------------------------------------
  std::size_t next_arrival = 0;
  std::size_t next_failure = 0;
  std::int64_t failed_requests = 0;
  std::int64_t requests = 0;
  std::int64_t stored_bytes = 0;
  double latency_sum = 0.0;
  const std::string group(kConsumerGroup);

  // Local mirror of the store consumer's cursors, so idle partitions cost
  // nothing per simulated millisecond.
  struct Cursor {
    std::int64_t position = 0;
    std::int64_t committed = 0;
  };
  std::map<std::string, std::vector<Cursor>> cursors;
  auto consumable = [&](const bus::PartitionState& part, const Cursor& cur) {
    const auto* log = part.leader_log();
    return log && static_cast<std::int64_t>(log->size()) > cur.position;
  };
  auto consumer_state = [&] {
    bool caught_up = true;
    bool can_progress = false;
    for (const auto& [name, topic] : cluster.topics()) {
      auto& curs = cursors[name];
      curs.resize(topic.partitions.size());
      for (std::size_t p = 0; p < curs.size(); ++p) {
        const auto& part = topic.partitions[p];
        caught_up = caught_up && curs[p].committed >= part.high_offset();
        can_progress = can_progress || consumable(part, curs[p]) || curs[p].committed < curs[p].position;
      }
    }
    return std::pair{caught_up, can_progress};
  };

  while (true) {
    while (next_failure < cfg.failures.size() && cfg.failures[next_failure].at_ms <= now) {
      const auto& ev = cfg.failures[next_failure++];
      if (ev.fail) {
        cluster.fail_broker(ev.broker, now);
      } else {
        cluster.recover_broker(ev.broker, now);
      }
    }
    cluster.advance_to(now);

    while (next_arrival < arrivals.size() && arrivals[next_arrival].at <= now) {
      const auto& a = arrivals[next_arrival++];
      const auto& src = cfg.sources[a.source];
      const auto raw = synth_raw(src, a.index, a.at, w.span_fraction, rng);
      auto& site = *edges[a.source % edges.size()];
      const auto topic = pubsub::raw_result_topic(Layer::Edge, raw.producer, raw.av_source_id);
      const Bytes payload = serialize_raw(raw);
      site.broker.publish(topic, payload, raw.producer);
      ++report.entities_produced;
      if (w.duplicate_rate > 0 && rng.unit() < w.duplicate_rate) {
        site.broker.publish(topic, payload, raw.producer);
        ++report.duplicates_injected;
      }
    }

    for (auto& site : edges) {
      for (const auto& msg : site->broker.poll(site->subscription)) {
        ++requests;
        try {
          site->node->accept_raw(deserialize_raw(msg.payload));
        } catch (const Error&) {
          ++failed_requests;
        }
      }
      while (!site->to_fog.empty() && site->to_fog.front().deliver_at <= now) {
        fogs[site->fog]->relay(site->to_fog.front().entity);
        site->to_fog.pop_front();
      }
    }
    for (auto& channel : fog_to_cloud) {
      while (!channel.empty() && channel.front().deliver_at <= now) {
        cloud.relay(channel.front().entity);
        channel.pop_front();
      }
    }
    producer.flush(cluster, now);

    for (const auto& [name, topic] : cluster.topics()) {
      auto& curs = cursors[name];
      curs.resize(topic.partitions.size());
      for (std::size_t p = 0; p < curs.size(); ++p) {
        auto& cur = curs[p];
        if (!consumable(topic.partitions[p], cur)) continue;
        const int partition = static_cast<int>(p);
        const auto records = cluster.poll(group, name, partition, w.consume_batch, now);
        if (records.empty()) continue;
        cur.position = records.back().offset + 1;
        for (const auto& rec : records) {
          const SdmEntity entity = deserialize_entity(rec.value);
          if (store->ingest(entity) == fusion::IngestOutcome::Inserted) {
            stored_bytes += static_cast<std::int64_t>(rec.value.size());
            latency_sum += static_cast<double>(now - (primary_time(entity.when).unix_ms() - kEpoch.unix_ms()));
          } else {
            ++report.bus_replays;
          }
        }
        if (w.duplicate_rate > 0 && rng.unit() < w.duplicate_rate) {
          cluster.rewind_to_committed(group, name, partition);  // crash before commit
          cur.position = cur.committed;
        } else {
          cluster.commit(group, name, partition);
          cur.committed = cur.position;
        }
      }
    }

    bool channels_empty = std::all_of(fog_to_cloud.begin(), fog_to_cloud.end(),
                                      [](const Channel& c) { return c.empty(); });
    bool edge_idle = true;
    for (const auto& site : edges) {
      channels_empty = channels_empty && site->to_fog.empty();
      edge_idle = edge_idle && site->broker.pending_total() == 0;
    }
    const bool arrivals_done = next_arrival == arrivals.size();
    const bool failures_done = next_failure == cfg.failures.size();
    const auto [caught_up, consumer_busy] = consumer_state();
    const bool backlog = producer.backlog() > 0 || !caught_up;
    if (arrivals_done && failures_done && channels_empty && edge_idle && !backlog &&
        !cluster.next_event_time()) {
      break;
    }
    if (now >= deadline) break;

    bus::SimTime next = deadline;
    // Whatever is left in the outbox is blocked on a leaderless partition and
    // is retried at the next event, typically the election.
    if (consumer_busy || !edge_idle) {
      next = now + 1;
    } else {
      if (!arrivals_done) next = std::min(next, arrivals[next_arrival].at);
      if (!failures_done) next = std::min(next, cfg.failures[next_failure].at_ms);
      if (const auto ev = cluster.next_event_time()) next = std::min(next, *ev);
      for (const auto& site : edges) {
        if (!site->to_fog.empty()) next = std::min(next, site->to_fog.front().deliver_at);
      }
      for (const auto& c : fog_to_cloud) {
        if (!c.empty()) next = std::min(next, c.front().deliver_at);
      }
    }
    now = std::max(next, now + 1);
  }

  // --- operator verifications and queries ----------------------------------
  const auto stored = store->all();
  if (w.verification_rate > 0) {
    for (const auto& e : stored) {
      if (rng.unit() >= w.verification_rate) continue;
      ++requests;
      VerificationMessage v{e.result_id, rng.unit() < 0.8 ? Verdict::Confirmed : Verdict::Rejected,
                            "operator-" + std::to_string(rng.uniform(1, 5)), kEpoch.plus_ms(now)};
      try {
        store->apply_verification(v);
      } catch (const Error&) {
        ++failed_requests;
      }
    }
  }
  const auto metrics = cluster.snapshot_metrics();
  for (std::int64_t q = 0; q < w.queries; ++q) {
    ++requests;
    const bus::SimTime a = rng.uniform(0, std::max<bus::SimTime>(last_arrival, 0));
    const bus::SimTime b = a + rng.uniform(0, 10'000);
    fusion::Query query{std::nullopt, kEpoch.plus_ms(a), kEpoch.plus_ms(b), std::nullopt};
    if (!cfg.sources.empty() && rng.unit() < 0.5) {
      query.source = cfg.sources[static_cast<std::size_t>(rng.uniform(0, cfg.sources.size() - 1))].source_id;
    }
    try {
      store->query(query);
    } catch (const Error&) {
      ++failed_requests;
    }
  }

  // --- AV plane -------------------------------------------------------------
  const auto active = av::discover_sources(std::span<const av::AVSource>(cfg.sources));
  auto archive = cfg.archive_root ? std::make_unique<av::SegmentArchive>(*cfg.archive_root)
                                  : std::make_unique<av::SegmentArchive>();
  const auto av_duration = std::chrono::milliseconds(std::max<bus::SimTime>(last_arrival, 1));
  std::vector<std::future<std::pair<std::int64_t, std::int64_t>>> jobs;
  for (const auto& src : active) {
    jobs.push_back(std::async(std::launch::async, [&, src] {
      const auto stream = av::synthetic_stream(src, cfg.seed, kEpoch, av_duration);
      const auto segments = av::ingest_and_segment(src, stream, cfg.segment_interval);
      std::int64_t bytes = 0;
      for (const auto& seg : segments) {
        archive->append(seg);
        bytes += static_cast<std::int64_t>(seg.bytes.size());
      }
      return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(segments.size()), bytes};
    }));
  }
  for (auto& job : jobs) {
    const auto [segments, bytes] = job.get();
    report.segments += segments;
    report.av_bytes += bytes;
  }
  for (const auto& src : active) {
    ++requests;
    const auto mid = av_duration.count() / 2;
    try {
      av::retrieve_clip(*archive, {src.source_id, TimeSpan(kEpoch.plus_ms(mid / 2), kEpoch.plus_ms(mid + mid / 2))});
    } catch (const Error&) {
      ++failed_requests;
    }
  }

  // --- metrics ---------------------------------------------------------------
  requests += static_cast<std::int64_t>(producer.attempts());
  failed_requests += static_cast<std::int64_t>(producer.failures());
  report.entities_stored = static_cast<std::int64_t>(store->size());
  report.entities_lost = report.entities_produced - report.entities_stored;
  report.data_loss_rate = report.entities_produced == 0
                              ? 0.0
                              : static_cast<double>(report.entities_lost) /
                                    static_cast<double>(report.entities_produced);
  report.requests = requests;
  report.failed_requests = failed_requests;
  report.availability =
      requests == 0 ? 1.0 : static_cast<double>(requests - failed_requests) / static_cast<double>(requests);
  report.sim_duration_ms = now;
  report.data_throughput_bytes_per_s =
      now > 0 ? static_cast<double>(stored_bytes + report.av_bytes) * 1000.0 / static_cast<double>(now) : 0.0;
  report.response_time_ms = metrics.replication_latency_ms;
  report.data_transfer_latency_ms =
      report.entities_stored > 0 ? latency_sum / static_cast<double>(report.entities_stored) : 0.0;
  report.cluster_nodes = cfg.cluster.brokers;
  report.open_handles = metrics.total_open_handles();
  report.unavailability_ms = metrics.unavailability_ms;
  report.partitions_total = metrics.throughput_proxy;
  std::int64_t suppressed = static_cast<std::int64_t>(cloud.suppressed());
  for (const auto& f : fogs) suppressed += static_cast<std::int64_t>(f->suppressed());
  for (const auto& e : edges) suppressed += static_cast<std::int64_t>(e->node->suppressed());
  report.duplicates_suppressed = suppressed;
  return report;
}

std::vector<ComparisonRow> compare_optimizers(const ComparisonRequest& request) {
  std::vector<ComparisonRow> rows;
  for (int brokers = request.brokers_min; brokers <= request.brokers_max; ++brokers) {
    for (const int consumers : request.consumers) {
      bus::ClusterConfig cfg = request.calibration;
      cfg.latency_per_load_ms *= consumers;
      cfg.brokers = brokers;
      cfg.replication = request.replication;

      ComparisonRow bench{brokers, request.replication, consumers, hdd::Algorithm::MsCnfl};
      try {
        for (int s = 0; s < request.seeds; ++s) {
          hdd::Rng rng(request.seed_base + static_cast<std::uint64_t>(s));
          const auto plan = hdd::ms_cnfl(brokers, request.replication, rng, cfg);
          const auto violations = hdd::check_constraints(plan, request.constraints, cfg);
          ++bench.runs;
          bench.partitions += static_cast<double>(plan.partitions);
          bench.latency_ms += plan.predicted_latency_ms;
          bench.brokers_used += brokers;
          bench.open_handles += static_cast<double>(plan.open_handles(cfg.handle_cost_per_replica));
          bench.violating_runs += !violations.empty();
          bench.latency_violations += std::any_of(violations.begin(), violations.end(), [](const auto& v) {
            return v.kind == hdd::Violation::Kind::Latency;
          });
        }
        if (bench.runs > 0) {
          bench.partitions /= bench.runs;
          bench.latency_ms /= bench.runs;
          bench.brokers_used /= bench.runs;
          bench.open_handles /= bench.runs;
        }
      } catch (const Error&) {
        bench.status = "empty-range";
      }
      rows.push_back(bench);

      auto from_plan = [&](hdd::Algorithm algo, auto&& make) {
        ComparisonRow row{brokers, request.replication, consumers, algo};
        try {
          const hdd::PartitionPlan plan = make();
          auto plan_cfg = cfg;
          plan_cfg.brokers = plan.brokers;
          const auto violations = hdd::check_constraints(plan, request.constraints, plan_cfg);
          row.runs = 1;
          row.partitions = static_cast<double>(plan.partitions);
          row.latency_ms = plan.predicted_latency_ms;
          row.brokers_used = plan.brokers;
          row.open_handles = static_cast<double>(plan.open_handles(cfg.handle_cost_per_replica));
          row.violating_runs = !violations.empty();
          row.latency_violations = std::any_of(violations.begin(), violations.end(), [](const auto& v) {
            return v.kind == hdd::Violation::Kind::Latency;
          });
        } catch (const Error&) {
          row.status = "infeasible";
        }
        rows.push_back(row);
      };
      from_plan(hdd::Algorithm::BroMin, [&] {
        if (bench.runs == 0) throw Error(Errc::Infeasible, "no benchmark partitions");
        const auto wanted = static_cast<std::int64_t>(std::ceil(bench.partitions));
        return hdd::bro_min(wanted, request.replication, request.constraints, cfg);
      });
      from_plan(hdd::Algorithm::BroMax, [&] {
        return hdd::bro_max(brokers, request.replication, request.constraints, cfg);
      });
    }
  }
  return rows;
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

namespace {

std::string escape_csv(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += escape_csv(fields[i]);
  }
  line += '\n';
  return line;
}

}  // namespace

std::string CsvTable::render() const {
  std::string out = join_row(header);
  for (const auto& row : rows) out += join_row(row);
  return out;
}

CsvTable to_table(const MetricsReport& r) {
  CsvTable t;
  t.header = {"data_loss_rate",     "availability",        "data_throughput_bytes_per_s",
              "response_time_ms",   "data_transfer_latency_ms", "cluster_nodes",
              "open_handles",       "unavailability_ms",   "entities_produced",
              "entities_stored",    "entities_lost",       "duplicates_injected",
              "duplicates_suppressed", "bus_replays",      "requests",
              "failed_requests",    "partitions_total",    "segments",
              "av_bytes",           "sim_duration_ms"};
  t.rows.push_back({format_number(r.data_loss_rate), format_number(r.availability),
                    format_number(r.data_throughput_bytes_per_s), format_number(r.response_time_ms),
                    format_number(r.data_transfer_latency_ms), std::to_string(r.cluster_nodes),
                    std::to_string(r.open_handles), format_number(r.unavailability_ms),
                    std::to_string(r.entities_produced), std::to_string(r.entities_stored),
                    std::to_string(r.entities_lost), std::to_string(r.duplicates_injected),
                    std::to_string(r.duplicates_suppressed), std::to_string(r.bus_replays),
                    std::to_string(r.requests), std::to_string(r.failed_requests),
                    std::to_string(r.partitions_total), std::to_string(r.segments),
                    std::to_string(r.av_bytes), std::to_string(r.sim_duration_ms)});
  return t;
}

CsvTable to_table(const std::vector<ComparisonRow>& rows) {
  CsvTable t;
  t.header = {"brokers",      "replication",  "consumers",      "algorithm",
              "runs",         "partitions",   "latency_ms",     "brokers_used",
              "open_handles", "violating_runs", "latency_violations", "status"};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.brokers), std::to_string(r.replication),
                      std::to_string(r.consumers), std::string(hdd::to_string(r.algorithm)),
                      std::to_string(r.runs), format_number(r.partitions),
                      format_number(r.latency_ms), format_number(r.brokers_used),
                      format_number(r.open_handles), std::to_string(r.violating_runs),
                      std::to_string(r.latency_violations), r.status});
  }
  return t;
}

void emit_csv(const CsvTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  const auto text = table.render();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path.string());
}

std::string summarize(const MetricsReport& r) {
  std::ostringstream out;
  out << "entities produced/stored/lost : " << r.entities_produced << " / " << r.entities_stored
      << " / " << r.entities_lost << '\n'
      << "data loss rate                : " << format_number(r.data_loss_rate) << '\n'
      << "availability                  : " << format_number(r.availability) << " (" << r.failed_requests
      << " failed of " << r.requests << " requests)\n"
      << "throughput (simulated)        : " << format_number(r.data_throughput_bytes_per_s) << " B/s\n"
      << "response time (simulated)     : " << format_number(r.response_time_ms) << " ms\n"
      << "transfer latency (simulated)  : " << format_number(r.data_transfer_latency_ms) << " ms\n"
      << "cluster nodes                 : " << r.cluster_nodes << '\n'
      << "open file handles             : " << r.open_handles << '\n'
      << "unavailability                : " << format_number(r.unavailability_ms) << " partition-ms\n"
      << "duplicates injected/suppressed: " << r.duplicates_injected << " / " << r.duplicates_suppressed
      << " (bus replays " << r.bus_replays << ")\n"
      << "AV segments / bytes           : " << r.segments << " / " << r.av_bytes << '\n'
      << "simulated duration            : " << r.sim_duration_ms << " ms\n";
  return out.str();
}

}  // namespace dmp::harness
