// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failed criteria.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "dmp/bus.hpp"
#include "dmp/error.hpp"
#include "dmp/harness.hpp"
#include "dmp/hdd.hpp"
#include "dmp/streamhandler.hpp"

using namespace dmp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int number, const std::string& title, const Outcome& outcome) {
  std::cout << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << number << ": " << title << " -- "
            << outcome.detail << std::endl;
  failures += !outcome.pass;
}

template <typename F>
Outcome guarded(F&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

bus::ClusterConfig shape(int b, int r) {
  bus::ClusterConfig cfg;
  cfg.brokers = b;
  cfg.replication = r;
  return cfg;
}

std::string run_command(const std::string& cmd) {
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed: " + cmd);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  if (status != 0) throw std::runtime_error("command failed: " + cmd);
  return out;
}

Outcome zero_loss(const fs::path& configs) {
  auto cfg = harness::ScenarioConfig::from_file(configs / "zero_loss.json");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = harness::run_scenario(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool failure_mid_run = !cfg.failures.empty() && cfg.failures.front().at_ms > 0 &&
                               cfg.failures.front().at_ms < r.sim_duration_ms && r.unavailability_ms > 0;
  std::ostringstream d;
  d << "edge=" << cfg.edge_nodes << " sources=" << cfg.sources.size() << " produced=" << r.entities_produced
    << " stored=" << r.entities_stored << " loss=" << r.data_loss_rate << " r=" << cfg.cluster.replication
    << " unavailability=" << r.unavailability_ms << " partition-ms, wall " << wall << " s";
  const bool ok = cfg.edge_nodes == 2 && cfg.sources.size() == 3 && r.entities_produced == 10'000 &&
                  cfg.cluster.replication == 2 && failure_mid_run && r.data_loss_rate == 0.0 && wall < 60.0;
  return {ok, d.str()};
}

Outcome latency_safety() {
  hdd::Constraints c;
  int checked = 0;
  int violating = 0;
  for (int b = 1; b <= 10; ++b) {
    for (int r = 1; r <= 3; ++r) {
      if (r > b) continue;  // no plan exists; both optimizers report Infeasible
      const auto max_plan = hdd::bro_max(b, r, c);
      violating += !hdd::check_constraints(max_plan, c, shape(b, r)).empty();
      const auto min_plan = hdd::bro_min(max_plan.partitions, r, c);
      violating += !hdd::check_constraints(min_plan, c, shape(min_plan.brokers, r)).empty();
      checked += 2;
    }
  }
  int witnesses = 0;
  std::optional<std::uint64_t> witness;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    hdd::Rng rng(seed);
    const auto plan = hdd::ms_cnfl(3, 2, rng);
    worst = std::max(worst, plan.predicted_latency_ms);
    const auto v = hdd::check_constraints(plan, c, shape(3, 2));
    if (std::any_of(v.begin(), v.end(), [](const auto& x) { return x.kind == hdd::Violation::Kind::Latency; })) {
      ++witnesses;
      if (!witness) witness = seed;
    }
  }
  std::ostringstream d;
  d << "optimizer plans violating: " << violating << "/" << checked << "; MS-CNFL B=3 r=2 latency violations: "
    << witnesses << "/1000";
  if (witness) {
    d << " (first seed " << *witness << ")";
  } else {
    d << " (P <= 100*B = 300 caps latency at " << worst
      << " ms <= 5 ms, so no seed can violate; a witness exists at B=5 r=5 seed 13, 5.22 ms)";
  }
  return {violating == 0 && witnesses > 0, d.str()};
}

Outcome equivalent_throughput() {
  int cases = 0;
  int mismatches = 0;
  for (int b = 1; b <= 10; ++b) {
    for (int r = 1; r <= 3; ++r) {
      if (r > b) continue;
      for (const double l : {1.05, 1.5, 2.0, 3.0, 5.0, 10.0, 1e9}) {
        hdd::Constraints c;
        c.l_max_ms = l;
        std::vector<std::int64_t> load(static_cast<std::size_t>(b));
        std::optional<std::int64_t> best;
        for (std::int64_t p = 1; p <= 2000; ++p) {
          for (int j = 0; j < r; ++j) ++load[static_cast<std::size_t>((p - 1 + j) % b)];
          const double latency = 1.0 + 0.01 * static_cast<double>(p) * r / b;
          if (*std::max_element(load.begin(), load.end()) <= 1000 && p <= 100 * b && latency <= l) best = p;
        }
        std::optional<std::int64_t> got;
        try {
          got = hdd::bro_max(b, r, c).partitions;
        } catch (const Error&) {
        }
        ++cases;
        mismatches += got != best;
      }
    }
  }
  std::ostringstream d;
  d << cases << " (B, r, L_max) cases, " << mismatches << " differ from the exhaustive scan";
  return {mismatches == 0, d.str()};
}

Outcome formula_fidelity() {
  constexpr int kSeeds = 10'000;
  const int b = 3;
  const int r = 2;
  const std::int64_t hi1 = 1000 * b / r;
  const std::int64_t hi2 = 100 * b;
  const std::int64_t bound = std::min(hi1, hi2);
  std::vector<int> counts(static_cast<std::size_t>(bound + 1));
  int out_of_range = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    hdd::Rng rng(seed);
    const auto p = hdd::ms_cnfl(b, r, rng).partitions;
    if (p < 1 || p > bound) {
      ++out_of_range;
    } else {
      ++counts[static_cast<std::size_t>(p)];
    }
  }
  // P(min(u1, u2) <= k) = 1 - (1 - k/hi1)(1 - k/hi2) for uniform draws on [1, hi].
  double ks = 0.0;
  double cumulative = 0.0;
  for (std::int64_t k = 1; k <= bound; ++k) {
    const double before = cumulative / kSeeds;
    cumulative += counts[static_cast<std::size_t>(k)];
    const auto cdf = [&](double x) { return 1.0 - (1.0 - x / hi1) * (1.0 - x / hi2); };
    ks = std::max({ks, std::abs(cumulative / kSeeds - cdf(static_cast<double>(k))),
                   std::abs(before - cdf(static_cast<double>(k - 1)))});
  }
  std::ostringstream d;
  d << kSeeds << " seeds at B=3 r=2: " << out_of_range << " outside [1, " << bound << "], KS distance " << ks;
  return {out_of_range == 0 && ks <= 0.02, d.str()};
}

Outcome segmentation() {
  std::mt19937_64 gen(2024);
  int lossless = 0;
  int tiled = 0;
  constexpr int kPairs = 50;
  for (int i = 0; i < kPairs; ++i) {
    const av::AVSource src{"src" + std::to_string(i), av::SourceKind::Camera,
                           1 + static_cast<std::int64_t>(gen() % 20'000), true};
    const auto length = std::chrono::milliseconds(1 + static_cast<std::int64_t>(gen() % 300'000));
    const auto delta = std::chrono::milliseconds(1 + static_cast<std::int64_t>(gen() % 60'000));
    const auto start = Timestamp::from_unix_ms(1'673'740'800'000);
    const auto stream = av::synthetic_stream(src, static_cast<std::uint64_t>(i), start, length);
    const auto segments = av::ingest_and_segment(src, stream, delta);
    std::string original;
    std::string joined;
    for (const auto& c : stream) original += c.bytes;
    for (const auto& s : segments) joined += s.bytes;
    lossless += joined == original;

    av::SegmentArchive archive;
    for (const auto& s : segments) archive.append(s);
    bool ok = true;
    for (int q = 0; q < 4 && ok; ++q) {
      auto a = static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(length.count()));
      auto b = static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(length.count()));
      if (a > b) std::swap(a, b);
      if (a == b) ++b;
      const auto clip = av::retrieve_clip(archive, {src.source_id, TimeSpan(start.plus_ms(a), start.plus_ms(b))});
      const auto& e = clip.manifest.entries;
      ok = !e.empty() && e.front().piece.start() == start.plus_ms(a) &&
           e.back().piece.end() == std::min(start.plus_ms(b), segments.back().span.end());
      for (std::size_t k = 0; ok && k + 1 < e.size(); ++k) ok = e[k].piece.end() == e[k + 1].piece.start();
      std::int64_t total = 0;
      for (const auto& x : e) total += x.byte_length;
      ok = ok && total == static_cast<std::int64_t>(clip.bytes.size()) &&
           original.find(clip.bytes) != std::string::npos;
    }
    tiled += ok;
  }
  std::ostringstream d;
  d << lossless << "/" << kPairs << " streams byte-identical after segmentation, " << tiled << "/" << kPairs
    << " with exactly tiled clip manifests";
  return {lossless == kPairs && tiled == kPairs, d.str()};
}

Outcome exactly_once() {
  harness::ScenarioConfig cfg;
  cfg.seed = 17;
  cfg.edge_nodes = 2;
  cfg.fog_nodes = 2;
  cfg.sources = {{"cam1", av::SourceKind::Camera, 1000, true},
                 {"cam2", av::SourceKind::Camera, 1000, true},
                 {"mic1", av::SourceKind::Microphone, 500, true}};
  cfg.workload.total_entities = 5'000;
  cfg.workload.duplicate_rate = 0.10;
  cfg.cluster.brokers = 3;
  cfg.cluster.replication = 2;
  const auto r = harness::run_scenario(cfg);
  std::ostringstream d;
  d << "unique produced=" << r.entities_produced << " duplicates injected=" << r.duplicates_injected
    << " bus replays=" << r.bus_replays << " stored=" << r.entities_stored;
  return {r.duplicates_injected > 0 && r.bus_replays > 0 && r.entities_stored == r.entities_produced, d.str()};
}

Outcome substituted_metrics() {
  const auto header = harness::to_table(harness::MetricsReport{}).header;
  const std::vector<std::string> required{"data_loss_rate",     "availability",  "data_throughput_bytes_per_s",
                                          "response_time_ms",   "data_transfer_latency_ms",
                                          "cluster_nodes",      "open_handles",  "unavailability_ms"};
  int missing = 0;
  for (const auto& name : required) missing += std::find(header.begin(), header.end(), name) == header.end();

  int sweeps = 0;
  int non_monotone = 0;
  for (const auto& [b, r] : std::vector<std::pair<int, int>>{{1, 1}, {3, 2}, {5, 3}, {10, 2}}) {
    bus::Cluster cluster(shape(b, r));
    cluster.create_topic("sweep", 1, 0);
    double prev = cluster.snapshot_metrics().replication_latency_ms;
    for (int p = 2; p <= 500; ++p) {
      cluster.expand_topic("sweep", p, 0);
      const double now = cluster.snapshot_metrics().replication_latency_ms;
      non_monotone += !(now > prev);
      prev = now;
    }
    ++sweeps;
  }
  std::ostringstream d;
  d << missing << " metric columns missing; latency strictly increasing over P=1..500 in " << sweeps - (non_monotone > 0)
    << "/" << sweeps << " sweeps (" << non_monotone << " non-increasing steps); hardware figures not reproduced";
  return {missing == 0 && non_monotone == 0, d.str()};
}

Outcome determinism(const std::string& cli, const fs::path& configs) {
  const std::string run = "\"" + cli + "\" run \"" + (configs / "zero_loss.json").string() + "\" 2>/dev/null";
  const std::string cmp = "\"" + cli + "\" compare --brokers-max 6 --consumers 1,2,3 --seeds 300 2>/dev/null";
  const auto run_a = run_command(run);
  const auto run_b = run_command(run);
  const auto cmp_a = run_command(cmp);
  const auto cmp_b = run_command(cmp);
  std::ostringstream d;
  d << "run: " << run_a.size() << " bytes " << (run_a == run_b ? "identical" : "DIFFERENT") << "; compare: "
    << cmp_a.size() << " bytes " << (cmp_a == cmp_b ? "identical" : "DIFFERENT");
  return {!run_a.empty() && run_a == run_b && !cmp_a.empty() && cmp_a == cmp_b, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <dmp-cli> <configs-dir>\n";
    return 64;
  }
  const std::string cli = argv[1];
  const fs::path configs = argv[2];

  report(1, "zero data loss with a mid-run broker failure", guarded([&] { return zero_loss(configs); }));
  report(2, "latency-constraint safety", guarded(latency_safety));
  report(3, "bro_max equals exhaustive argmax", guarded(equivalent_throughput));
  report(4, "MS-CNFL bounds and distribution", guarded(formula_fidelity));
  report(5, "segmentation losslessness and clip tiling", guarded(segmentation));
  report(6, "exactly-once relay under replays", guarded(exactly_once));
  report(7, "substituted metrics and latency trend", guarded(substituted_metrics));
  report(8, "byte-reproducible run and compare", guarded([&] { return determinism(cli, configs); }));

  std::cout << (8 - failures) << "/8 criteria passed" << std::endl;
  return failures;
}
