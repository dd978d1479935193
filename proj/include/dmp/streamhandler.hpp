#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmp/entity.hpp"

namespace dmp::av {

enum class SourceKind { Camera, Microphone };
std::string_view to_string(SourceKind kind) noexcept;

struct AVSource {
  std::string source_id;
  SourceKind kind = SourceKind::Camera;
  std::int64_t rate_bytes_per_s = 0;
  bool active = true;

  friend bool operator==(const AVSource&, const AVSource&) = default;
};

/// Registry text: one "source_id,kind,rate_bytes_per_s,active" per line.
/// Throws Error(RegistryUnavailable) on malformed lines or duplicate ids.
std::vector<AVSource> parse_registry(std::string_view text);
std::string format_registry(std::span<const AVSource> sources);

/// Active sources only, in registry order.
std::vector<AVSource> discover_sources(std::span<const AVSource> registry);
/// Throws Error(RegistryUnavailable) if the file cannot be read.
std::vector<AVSource> discover_sources(const std::filesystem::path& registry_file);

/// Bytes captured over [start, end) at a uniform rate.
struct Chunk {
  Timestamp start;
  Timestamp end;
  Bytes bytes;
};

struct SegmentFile {
  std::string source_id;
  TimeSpan span;
  Bytes bytes;
  std::int64_t seq = 0;
};

/// Cuts the stream at start + k * interval. A chunk straddling a boundary
/// is split proportionally by time. The final segment may be shorter.
/// Throws Error(NonMonotonicTimestamps) if a chunk starts before the
/// previous one ended or ends before it starts.
std::vector<SegmentFile> ingest_and_segment(const AVSource& source, std::span<const Chunk> stream,
                                            std::chrono::milliseconds interval);

/// Deterministic pseudorandom stream for (source_id, seed) at the source's
/// nominal rate, in chunks of `chunk` length.
std::vector<Chunk> synthetic_stream(const AVSource& source, std::uint64_t seed, Timestamp start,
                                    std::chrono::milliseconds duration,
                                    std::chrono::milliseconds chunk = std::chrono::milliseconds{100});

struct IndexEntry {
  std::int64_t seq = 0;
  TimeSpan span;
  std::int64_t length_bytes = 0;
};

struct ClipRequest {
  std::string source_id;
  TimeSpan range;
};

struct ManifestEntry {
  std::int64_t seq = 0;
  TimeSpan piece;
  std::int64_t byte_offset = 0;  // within the segment
  std::int64_t byte_length = 0;
};

struct ClipManifest {
  std::string source_id;
  std::vector<ManifestEntry> entries;
  TimeSpan served;
  std::optional<std::filesystem::path> location;

  Document to_document() const;
};

struct Clip {
  ClipManifest manifest;
  Bytes bytes;
};

/// Segment archive. With a root directory, segments are stored as
/// `<root>/<source_id>/<seq>.seg` with `<root>/<source_id>/index.csv`
/// listing "seq,start_ms,end_ms,length_bytes"; without one, bytes stay in
/// memory. Appends are serialized; readers share a lock.
class SegmentArchive {
 public:
  SegmentArchive() = default;
  explicit SegmentArchive(std::filesystem::path root);

  /// Reads every `<root>/*/index.csv`.
  static SegmentArchive load(const std::filesystem::path& root);

  SegmentArchive(const SegmentArchive&) = delete;
  SegmentArchive& operator=(const SegmentArchive&) = delete;
  SegmentArchive(SegmentArchive&& other) noexcept;

  void append(const SegmentFile& segment);

  std::vector<std::string> sources() const;
  std::vector<IndexEntry> index(const std::string& source_id) const;
  Bytes read_segment(const std::string& source_id, std::int64_t seq) const;
  const std::optional<std::filesystem::path>& root() const { return root_; }

 private:
  struct SourceArchive {
    std::vector<IndexEntry> entries;
    std::map<std::int64_t, Bytes> in_memory;
  };

  std::filesystem::path segment_path(const std::string& source_id, std::int64_t seq) const;

  mutable std::shared_mutex mutex_;
  std::optional<std::filesystem::path> root_;
  std::map<std::string, SourceArchive> sources_;
};

/// Collects every segment overlapping the closed request range and trims
/// the first and last proportionally by time. Throws Error(UnknownSource)
/// or Error(NoDataInRange).
Clip retrieve_clip(const SegmentArchive& archive, const ClipRequest& request);

}  // namespace dmp::av
