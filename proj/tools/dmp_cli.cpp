#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dmp/error.hpp"
#include "dmp/fusion_store.hpp"
#include "dmp/harness.hpp"
#include "dmp/hdd.hpp"
#include "dmp/streamhandler.hpp"

namespace fs = std::filesystem;
using namespace dmp;

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path.string());
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Raw capture file: cut into 100 ms chunks at the source's nominal rate.
std::vector<av::Chunk> chunks_from_capture(const av::AVSource& src, const std::string& bytes,
                                           Timestamp start) {
  std::vector<av::Chunk> chunks;
  if (src.rate_bytes_per_s <= 0) {
    throw Error(Errc::RegistryUnavailable, src.source_id + ": capture needs a positive rate");
  }
  const std::size_t per_chunk = std::max<std::size_t>(1, static_cast<std::size_t>(src.rate_bytes_per_s / 10));
  std::size_t offset = 0;
  std::int64_t t = 0;
  while (offset < bytes.size()) {
    const std::size_t n = std::min(per_chunk, bytes.size() - offset);
    const auto ms = std::max<std::int64_t>(1, static_cast<std::int64_t>(n) * 1000 / src.rate_bytes_per_s);
    chunks.push_back({start.plus_ms(t), start.plus_ms(t + ms), bytes.substr(offset, n)});
    offset += n;
    t += ms;
  }
  return chunks;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-to-cloud data management platform simulator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run a scenario and print its metrics");
  std::string run_config;
  std::string run_csv;
  std::string run_store;
  std::optional<std::uint64_t> run_seed;
  run->add_option("config", run_config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--csv", run_csv, "Write the metrics CSV here instead of stdout");
  run->add_option("--store", run_store, "Persist the fusion store to this append file");
  run->add_option("--seed", run_seed, "Override the config seed")->envname("DMP_SEED");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare MS-CNFL, BroMin and BroMax");
  harness::ComparisonRequest req;
  std::string compare_csv;
  std::string compare_config;
  double compare_lmax = req.constraints.l_max_ms;
  compare->add_option("--brokers-min", req.brokers_min)->capture_default_str();
  compare->add_option("--brokers-max", req.brokers_max)->capture_default_str();
  compare->add_option("--replication", req.replication)->capture_default_str();
  compare->add_option("--l-max", compare_lmax, "Latency bound in ms")->capture_default_str();
  compare->add_option("--consumers", req.consumers, "Consumer counts to sweep")->delimiter(',');
  compare->add_option("--seeds", req.seeds, "MS-CNFL runs per row")->capture_default_str();
  compare->add_option("--seed", req.seed_base, "First MS-CNFL seed")->envname("DMP_SEED")->capture_default_str();
  compare->add_option("--calibration", compare_config, "JSON with cluster latency constants")
      ->check(CLI::ExistingFile);
  compare->add_option("--csv", compare_csv, "Write the table here instead of stdout");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Compute one partition plan");
  int opt_brokers = 3;
  int opt_replication = 2;
  double opt_lmax = 5.0;
  std::uint64_t opt_seed = 0;
  std::string opt_algorithm = "bro-max";
  std::int64_t opt_partitions = 0;
  optimize->add_option("--brokers", opt_brokers)->capture_default_str();
  optimize->add_option("--replication", opt_replication)->capture_default_str();
  optimize->add_option("--l-max", opt_lmax)->capture_default_str();
  optimize->add_option("--seed", opt_seed)->envname("DMP_SEED")->capture_default_str();
  optimize->add_option("--algorithm", opt_algorithm)
      ->check(CLI::IsMember({"ms-cnfl", "bro-min", "bro-max"}))
      ->capture_default_str();
  optimize->add_option("--partitions", opt_partitions, "Requested partitions for bro-min");

  // segment
  auto* segment = app.add_subcommand("segment", "Segment the sources listed in <dir>/registry.csv");
  std::string seg_dir;
  std::string seg_out;
  double seg_interval = 10.0;
  double seg_duration = 60.0;
  std::uint64_t seg_seed = 1;
  segment->add_option("source-dir", seg_dir)->required()->check(CLI::ExistingDirectory);
  segment->add_option("--interval-s", seg_interval)->capture_default_str();
  segment->add_option("--duration-s", seg_duration, "Synthetic stream length")->capture_default_str();
  segment->add_option("--seed", seg_seed)->envname("DMP_SEED")->capture_default_str();
  segment->add_option("--out", seg_out, "Archive root (default <source-dir>/archive)");

  // clip
  auto* clip = app.add_subcommand("clip", "Retrieve a clip from an archive");
  std::string clip_root;
  std::string clip_source;
  std::string clip_from;
  std::string clip_to;
  std::string clip_out;
  clip->add_option("archive", clip_root)->required()->check(CLI::ExistingDirectory);
  clip->add_option("--source", clip_source)->required();
  clip->add_option("--from", clip_from)->required();
  clip->add_option("--to", clip_to)->required();
  clip->add_option("--out", clip_out, "Write clip bytes here");

  // query
  auto* query = app.add_subcommand("query", "Query a persisted fusion store");
  std::string q_store;
  std::string q_from;
  std::string q_to;
  std::string q_source;
  std::vector<std::string> q_kinds;
  query->add_option("store", q_store)->required()->check(CLI::ExistingFile);
  query->add_option("--from", q_from)->required();
  query->add_option("--to", q_to)->required();
  query->add_option("--source", q_source);
  query->add_option("--kind", q_kinds, "MediaEvent, Alert or Anomaly; repeatable");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = harness::ScenarioConfig::from_file(run_config);
      if (run_seed) cfg.seed = *run_seed;
      if (!run_store.empty()) cfg.store_path = run_store;
      const auto t0 = std::chrono::steady_clock::now();
      const auto report = harness::run_scenario(cfg);
      const double wall = seconds_since(t0);
      const auto table = harness::to_table(report);
      if (run_csv.empty()) {
        std::cout << table.render() << '\n';
      } else {
        harness::emit_csv(table, run_csv);
      }
      std::cout << harness::summarize(report);
      std::cerr << "wall-clock runtime             : " << wall << " s\n"
                << "wall-clock entity throughput   : "
                << (wall > 0 ? static_cast<double>(report.entities_stored) / wall : 0.0) << " entities/s\n";
    } else if (*compare) {
      if (!compare_config.empty()) {
        const auto text = read_file(compare_config);
        auto doc = Document::parse(text.value_or(""), nullptr, false);
        if (doc.is_discarded()) throw Error(Errc::ConfigError, compare_config + ": not valid JSON");
        req.calibration = bus::ClusterConfig::from_document(doc);
      }
      req.constraints.l_max_ms = compare_lmax;
      req.constraints.validate();
      const auto table = harness::to_table(harness::compare_optimizers(req));
      if (compare_csv.empty()) {
        std::cout << table.render();
      } else {
        harness::emit_csv(table, compare_csv);
      }
    } else if (*optimize) {
      hdd::Constraints c;
      c.l_max_ms = opt_lmax;
      c.validate();
      bus::ClusterConfig calibration;
      const auto algo = hdd::parse_algorithm(opt_algorithm);
      hdd::PartitionPlan plan;
      if (algo == hdd::Algorithm::MsCnfl) {
        hdd::Rng rng(opt_seed);
        plan = hdd::ms_cnfl(opt_brokers, opt_replication, rng, calibration);
      } else if (algo == hdd::Algorithm::BroMax) {
        plan = hdd::bro_max(opt_brokers, opt_replication, c, calibration);
      } else {
        if (opt_partitions < 1) throw Error(Errc::ConfigError, "--partitions is required for bro-min");
        plan = hdd::bro_min(opt_partitions, opt_replication, c, calibration);
      }
      auto check_cfg = calibration;
      check_cfg.brokers = plan.brokers;
      const auto violations = hdd::check_constraints(plan, c, check_cfg);
      std::cout << plan.to_document().dump(2) << '\n';
      if (violations.empty()) {
        std::cout << "violations: none\n";
      } else {
        std::cout << "violations:\n";
        for (const auto& v : violations) std::cout << "  - " << v.describe() << '\n';
      }
    } else if (*segment) {
      const fs::path dir(seg_dir);
      const auto sources = av::discover_sources(dir / "registry.csv");
      const fs::path out = seg_out.empty() ? dir / "archive" : fs::path(seg_out);
      av::SegmentArchive archive(out);
      const auto interval = std::chrono::milliseconds(std::llround(seg_interval * 1000));
      const auto duration = std::chrono::milliseconds(std::llround(seg_duration * 1000));
      const Timestamp start = Timestamp::from_unix_ms(0);
      std::cout << "source_id,segments,bytes\n";
      for (const auto& src : sources) {
        const auto capture = read_file(dir / (src.source_id + ".raw"));
        const auto stream = capture ? chunks_from_capture(src, *capture, start)
                                    : av::synthetic_stream(src, seg_seed, start, duration);
        const auto segments = av::ingest_and_segment(src, stream, interval);
        std::int64_t bytes = 0;
        for (const auto& s : segments) {
          archive.append(s);
          bytes += static_cast<std::int64_t>(s.bytes.size());
        }
        std::cout << src.source_id << ',' << segments.size() << ',' << bytes << '\n';
      }
    } else if (*clip) {
      const auto archive = av::SegmentArchive::load(clip_root);
      const auto result = av::retrieve_clip(
          archive, {clip_source, TimeSpan(parse_timestamp(clip_from), parse_timestamp(clip_to))});
      if (!clip_out.empty()) write_file(clip_out, result.bytes);
      std::cout << result.manifest.to_document().dump(2) << '\n';
    } else if (*query) {
      const fusion::FusionStore store{fs::path(q_store)};
      fusion::Query q{std::nullopt, parse_timestamp(q_from), parse_timestamp(q_to), std::nullopt};
      if (!q_source.empty()) q.source = q_source;
      if (!q_kinds.empty()) {
        q.kinds.emplace();
        for (const auto& k : q_kinds) q.kinds->insert(parse_kind(k));
      }
      for (const auto& e : store.query(q)) std::cout << serialize_entity(e) << '\n';
    }
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
