#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dmp/error.hpp"
#include "dmp/streamhandler.hpp"

using namespace dmp;
using namespace dmp::av;
namespace fs = std::filesystem;
using std::chrono::milliseconds;

namespace {

Timestamp at(std::int64_t ms) { return Timestamp::from_unix_ms(ms); }

AVSource source(const std::string& id, std::int64_t rate) {
  return {id, SourceKind::Camera, rate, true};
}

Bytes concat(const std::vector<Chunk>& chunks) {
  Bytes out;
  for (const auto& c : chunks) out += c.bytes;
  return out;
}

Bytes concat(const std::vector<SegmentFile>& segments) {
  Bytes out;
  for (const auto& s : segments) out += s.bytes;
  return out;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::IoFailure;
}

}  // namespace

TEST_CASE("source discovery") {
  const auto registry = parse_registry("cam1,camera,1000,true\ncam2,camera,1000,1\nmic1,microphone,200,false\n");
  CHECK(discover_sources(std::span<const AVSource>(registry)).size() == 2);
  CHECK(discover_sources(std::span<const AVSource>()).empty());
  CHECK(code_of([] { discover_sources(fs::path("/nonexistent/registry.csv")); }) == Errc::RegistryUnavailable);
  CHECK(code_of([] { parse_registry("cam1,camera,1000,true\ncam1,camera,5,true\n"); }) ==
        Errc::RegistryUnavailable);
  CHECK(code_of([] { parse_registry("cam1,drone,1000,true\n"); }) == Errc::RegistryUnavailable);
  CHECK(parse_registry(format_registry(registry)) == registry);
}

TEST_CASE("segment boundaries") {
  const auto src = source("cam1", 1000);
  const auto stream = synthetic_stream(src, 1, at(0), milliseconds(35'000));
  const auto segments = ingest_and_segment(src, stream, milliseconds(10'000));
  REQUIRE(segments.size() == 4);
  const std::vector<std::pair<std::int64_t, std::int64_t>> spans{{0, 10'000}, {10'000, 20'000}, {20'000, 30'000}, {30'000, 35'000}};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(segments[i].seq == static_cast<std::int64_t>(i));
    CHECK(segments[i].span == TimeSpan(at(spans[i].first), at(spans[i].second)));
  }
  CHECK(concat(segments) == concat(stream));

  const auto short_stream = synthetic_stream(src, 1, at(0), milliseconds(4'000));
  CHECK(ingest_and_segment(src, short_stream, milliseconds(10'000)).size() == 1);
}

TEST_CASE("1 MB/s for 60 s in 10 s segments") {
  const auto src = source("cam1", 1'000'000);
  const auto stream = synthetic_stream(src, 9, at(0), milliseconds(60'000));
  const auto segments = ingest_and_segment(src, stream, milliseconds(10'000));
  REQUIRE(segments.size() == 6);
  for (const auto& s : segments) CHECK(s.bytes.size() == 10'000'000);
  CHECK(concat(segments) == concat(stream));
}

TEST_CASE("non-monotonic chunks are rejected") {
  const auto src = source("cam1", 1000);
  std::vector<Chunk> chunks{{at(0), at(100), "aaaa"}, {at(50), at(150), "bbbb"}};
  CHECK(code_of([&] { ingest_and_segment(src, chunks, milliseconds(1000)); }) == Errc::NonMonotonicTimestamps);
}

TEST_CASE("clip retrieval") {
  const auto src = source("cam1", 1000);
  const auto stream = synthetic_stream(src, 2, at(0), milliseconds(40'000));
  SegmentArchive archive;
  for (const auto& s : ingest_and_segment(src, stream, milliseconds(10'000))) archive.append(s);
  const Bytes original = concat(stream);

  const auto inside = retrieve_clip(archive, {"cam1", TimeSpan(at(2'000), at(7'000))});
  REQUIRE(inside.manifest.entries.size() == 1);
  CHECK(inside.manifest.served == TimeSpan(at(2'000), at(7'000)));
  CHECK(inside.bytes == original.substr(2'000, 5'000));

  const auto across = retrieve_clip(archive, {"cam1", TimeSpan(at(12'000), at(28'000))});
  REQUIRE(across.manifest.entries.size() == 2);
  CHECK(across.manifest.entries[0].seq == 1);
  CHECK(across.manifest.entries[0].piece == TimeSpan(at(12'000), at(20'000)));
  CHECK(across.manifest.entries[1].seq == 2);
  CHECK(across.manifest.entries[1].piece == TimeSpan(at(20'000), at(28'000)));
  CHECK(across.bytes == original.substr(12'000, 16'000));

  CHECK(code_of([&] { retrieve_clip(archive, {"cam1", TimeSpan(at(-5'000), at(-1'000))}); }) ==
        Errc::NoDataInRange);
  CHECK(code_of([&] { retrieve_clip(archive, {"cam9", TimeSpan(at(0), at(1))}); }) == Errc::UnknownSource);
}

TEST_CASE("random streams: lossless segments and exactly tiled clips") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto src = source("s" + std::to_string(trial), 1 + static_cast<std::int64_t>(gen() % 5000));
    const auto length = milliseconds(1 + static_cast<std::int64_t>(gen() % 120'000));
    const auto delta = milliseconds(1 + static_cast<std::int64_t>(gen() % 30'000));
    const auto start = at(static_cast<std::int64_t>(gen() % 1'000'000));
    const auto stream = synthetic_stream(src, trial, start, length);
    const auto segments = ingest_and_segment(src, stream, delta);
    const Bytes original = concat(stream);
    CHECK(concat(segments) == original);

    SegmentArchive archive;
    for (const auto& s : segments) archive.append(s);
    const auto data_end = segments.back().span.end().unix_ms();
    for (int q = 0; q < 5; ++q) {
      auto a = start.unix_ms() + static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(length.count()));
      auto b = start.unix_ms() + static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(length.count() + 5000));
      if (a > b) std::swap(a, b);
      if (a == b) ++b;
      const auto clip = retrieve_clip(archive, {src.source_id, TimeSpan(at(a), at(b))});
      const auto& entries = clip.manifest.entries;
      REQUIRE(!entries.empty());
      CHECK(entries.front().piece.start().unix_ms() == a);
      CHECK(entries.back().piece.end().unix_ms() == std::min(b, data_end));
      std::int64_t total = 0;
      for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
        CHECK(entries[i].piece.end() == entries[i + 1].piece.start());
        CHECK(entries[i + 1].seq == entries[i].seq + 1);
      }
      for (const auto& e : entries) total += e.byte_length;
      CHECK(total == static_cast<std::int64_t>(clip.bytes.size()));
      // Served bytes are one contiguous run of the original stream.
      const auto& first = entries.front();
      std::int64_t offset = first.byte_offset;
      for (const auto& s : segments) {
        if (s.seq == first.seq) break;
        offset += static_cast<std::int64_t>(s.bytes.size());
      }
      CHECK(original.compare(static_cast<std::size_t>(offset), clip.bytes.size(), clip.bytes) == 0);
    }
  }
}

TEST_CASE("archive on disk reloads") {
  const auto root = fs::temp_directory_path() / ("dmp_archive_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const auto src = source("cam1", 800);
  const auto stream = synthetic_stream(src, 5, at(1'000), milliseconds(25'000));
  {
    SegmentArchive archive(root);
    for (const auto& s : ingest_and_segment(src, stream, milliseconds(10'000))) archive.append(s);
  }
  CHECK(fs::exists(root / "cam1" / "index.csv"));
  CHECK(fs::exists(root / "cam1" / "0.seg"));
  const auto loaded = SegmentArchive::load(root);
  CHECK(loaded.sources() == std::vector<std::string>{"cam1"});
  CHECK(loaded.index("cam1").size() == 3);
  const auto clip = retrieve_clip(loaded, {"cam1", TimeSpan(at(1'000), at(26'000))});
  CHECK(clip.bytes == concat(stream));

  SegmentArchive memory;
  SegmentFile gap{"cam1", TimeSpan(at(0), at(10)), "x", 1};
  CHECK_THROWS_AS(memory.append(gap), Error);
  fs::remove_all(root);
}
