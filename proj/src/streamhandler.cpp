#include "dmp/streamhandler.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "dmp/bus.hpp"
#include "dmp/error.hpp"
#include "dmp/hdd.hpp"

namespace dmp::av {

namespace fs = std::filesystem;

std::string_view to_string(SourceKind kind) noexcept {
  return kind == SourceKind::Camera ? "camera" : "microphone";
}

namespace {

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  Int value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

std::string read_file(const fs::path& path, Errc on_failure) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(on_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Byte index reached at time `t` inside [start, end) holding `length` bytes.
std::int64_t byte_at(std::int64_t length, std::int64_t start, std::int64_t end, std::int64_t t) {
  if (end <= start || t >= end) return length;
  if (t <= start) return 0;
  return static_cast<std::int64_t>(static_cast<__int128>(length) * (t - start) / (end - start));
}

}  // namespace

std::vector<AVSource> parse_registry(std::string_view text) {
  std::vector<AVSource> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto raw_line : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw_line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, ',');
    const auto where = "registry line " + std::to_string(line_no);
    if (fields.size() != 4) throw Error(Errc::RegistryUnavailable, where + ": expected 4 fields");
    AVSource src;
    src.source_id = std::string(trim(fields[0]));
    const auto kind = trim(fields[1]);
    if (kind == "camera") {
      src.kind = SourceKind::Camera;
    } else if (kind == "microphone") {
      src.kind = SourceKind::Microphone;
    } else {
      throw Error(Errc::RegistryUnavailable, where + ": unknown kind");
    }
    const auto rate = parse_int<std::int64_t>(trim(fields[2]));
    if (!rate || *rate < 0) throw Error(Errc::RegistryUnavailable, where + ": bad rate");
    src.rate_bytes_per_s = *rate;
    const auto active = trim(fields[3]);
    if (active == "true" || active == "1") {
      src.active = true;
    } else if (active == "false" || active == "0") {
      src.active = false;
    } else {
      throw Error(Errc::RegistryUnavailable, where + ": bad active flag");
    }
    if (src.source_id.empty() || src.source_id.find('/') != std::string::npos) {
      throw Error(Errc::RegistryUnavailable, where + ": bad source id");
    }
    if (!ids.insert(src.source_id).second) {
      throw Error(Errc::RegistryUnavailable, where + ": duplicate source " + src.source_id);
    }
    out.push_back(std::move(src));
  }
  return out;
}

std::string format_registry(std::span<const AVSource> sources) {
  std::string out;
  for (const auto& s : sources) {
    out += s.source_id + ',' + std::string(to_string(s.kind)) + ',' +
           std::to_string(s.rate_bytes_per_s) + ',' + (s.active ? "true" : "false") + '\n';
  }
  return out;
}

std::vector<AVSource> discover_sources(std::span<const AVSource> registry) {
  std::vector<AVSource> out;
  std::copy_if(registry.begin(), registry.end(), std::back_inserter(out),
               [](const AVSource& s) { return s.active; });
  return out;
}

std::vector<AVSource> discover_sources(const fs::path& registry_file) {
  const auto text = read_file(registry_file, Errc::RegistryUnavailable);
  const auto all = parse_registry(text);
  return discover_sources(std::span<const AVSource>(all));
}

std::vector<SegmentFile> ingest_and_segment(const AVSource& source, std::span<const Chunk> stream,
                                            std::chrono::milliseconds interval) {
  if (interval.count() <= 0) throw Error(Errc::ConfigError, "segment interval must be positive");
  std::vector<SegmentFile> segments;
  if (stream.empty()) return segments;

  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (stream[i].end < stream[i].start || (i > 0 && stream[i].start < stream[i - 1].end)) {
      throw Error(Errc::NonMonotonicTimestamps, source.source_id + " chunk " + std::to_string(i));
    }
  }

  const std::int64_t origin = stream.front().start.unix_ms();
  const std::int64_t finish = stream.back().end.unix_ms();
  const std::int64_t delta = interval.count();
  const std::int64_t count = std::max<std::int64_t>(1, (finish - origin + delta - 1) / delta);

  segments.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    const auto start = Timestamp::from_unix_ms(origin + k * delta);
    const auto end = Timestamp::from_unix_ms(std::min(origin + (k + 1) * delta, finish));
    segments.push_back(SegmentFile{source.source_id, TimeSpan(start, end), {}, k});
  }

  for (const auto& chunk : stream) {
    const std::int64_t cs = chunk.start.unix_ms();
    const std::int64_t ce = chunk.end.unix_ms();
    const auto length = static_cast<std::int64_t>(chunk.bytes.size());
    std::int64_t k = std::min((cs - origin) / delta, count - 1);
    std::int64_t consumed = 0;
    while (consumed < length) {
      const std::int64_t boundary = origin + (k + 1) * delta;
      const std::int64_t upto = k == count - 1 ? length : byte_at(length, cs, ce, boundary);
      if (upto > consumed) {
        segments[k].bytes.append(chunk.bytes, static_cast<std::size_t>(consumed),
                                 static_cast<std::size_t>(upto - consumed));
        consumed = upto;
      }
      ++k;
    }
  }
  return segments;
}

std::vector<Chunk> synthetic_stream(const AVSource& source, std::uint64_t seed, Timestamp start,
                                    std::chrono::milliseconds duration,
                                    std::chrono::milliseconds chunk) {
  std::vector<Chunk> out;
  if (duration.count() <= 0 || chunk.count() <= 0) return out;
  hdd::Rng rng(bus::fnv1a64(source.source_id) ^ seed);
  const std::int64_t total = duration.count();
  std::int64_t emitted = 0;
  for (std::int64_t t = 0; t < total; t += chunk.count()) {
    const std::int64_t t_end = std::min(t + chunk.count(), total);
    // Cumulative byte count at t_end, so rounding never drifts.
    const auto target = static_cast<std::int64_t>(static_cast<__int128>(source.rate_bytes_per_s) * t_end / 1000);
    Chunk c{start.plus_ms(t), start.plus_ms(t_end), {}};
    c.bytes.resize(static_cast<std::size_t>(target - emitted));
    for (std::size_t i = 0; i < c.bytes.size(); i += 8) {
      const std::uint64_t word = rng.next();
      for (std::size_t b = 0; b < 8 && i + b < c.bytes.size(); ++b) {
        c.bytes[i + b] = static_cast<char>((word >> (8 * b)) & 0xFF);
      }
    }
    emitted = target;
    out.push_back(std::move(c));
  }
  return out;
}

Document ClipManifest::to_document() const {
  Document entries_doc = Document::array();
  for (const auto& e : entries) {
    entries_doc.push_back({{"seq", e.seq},
                           {"start", format_timestamp(e.piece.start())},
                           {"end", format_timestamp(e.piece.end())},
                           {"byte_offset", e.byte_offset},
                           {"byte_length", e.byte_length}});
  }
  Document doc = {{"source_id", source_id},
                  {"entries", entries_doc},
                  {"served", {{"start", format_timestamp(served.start())},
                              {"end", format_timestamp(served.end())}}}};
  if (location) doc["location"] = location->generic_string();
  return doc;
}

SegmentArchive::SegmentArchive(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(*root_, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + root_->string());
}

SegmentArchive::SegmentArchive(SegmentArchive&& other) noexcept
    : root_(std::move(other.root_)), sources_(std::move(other.sources_)) {}

SegmentArchive SegmentArchive::load(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(Errc::IoFailure, "no archive at " + root.string());
  SegmentArchive archive(root);
  for (const auto& dir : fs::directory_iterator(root)) {
    const auto index_path = dir.path() / "index.csv";
    if (!dir.is_directory() || !fs::exists(index_path)) continue;
    auto& src = archive.sources_[dir.path().filename().string()];
    const auto text = read_file(index_path, Errc::IoFailure);
    for (const auto raw_line : split(text, '\n')) {
      const auto line = trim(raw_line);
      if (line.empty()) continue;
      const auto f = split(line, ',');
      const auto seq = f.size() == 4 ? parse_int<std::int64_t>(f[0]) : std::nullopt;
      const auto start = f.size() == 4 ? parse_int<std::int64_t>(f[1]) : std::nullopt;
      const auto end = f.size() == 4 ? parse_int<std::int64_t>(f[2]) : std::nullopt;
      const auto len = f.size() == 4 ? parse_int<std::int64_t>(f[3]) : std::nullopt;
      if (!seq || !start || !end || !len || *end < *start) {
        throw Error(Errc::IoFailure, "bad index line in " + index_path.string());
      }
      src.entries.push_back(IndexEntry{
          *seq, TimeSpan(Timestamp::from_unix_ms(*start), Timestamp::from_unix_ms(*end)), *len});
    }
  }
  return archive;
}

fs::path SegmentArchive::segment_path(const std::string& source_id, std::int64_t seq) const {
  return *root_ / source_id / (std::to_string(seq) + ".seg");
}

void SegmentArchive::append(const SegmentFile& segment) {
  std::unique_lock lock(mutex_);
  auto& src = sources_[segment.source_id];
  const std::int64_t expected_seq = static_cast<std::int64_t>(src.entries.size());
  if (segment.seq != expected_seq) {
    throw Error(Errc::NonMonotonicTimestamps,
                segment.source_id + " segment seq " + std::to_string(segment.seq));
  }
  if (!src.entries.empty() && src.entries.back().span.end() != segment.span.start()) {
    throw Error(Errc::NonMonotonicTimestamps, segment.source_id + " segment spans not contiguous");
  }
  const IndexEntry entry{segment.seq, segment.span, static_cast<std::int64_t>(segment.bytes.size())};
  if (root_) {
    const auto dir = *root_ / segment.source_id;
    fs::create_directories(dir);
    {
      std::ofstream out(segment_path(segment.source_id, segment.seq), std::ios::binary | std::ios::trunc);
      out.write(segment.bytes.data(), static_cast<std::streamsize>(segment.bytes.size()));
      if (!out) throw Error(Errc::IoFailure, "write segment " + std::to_string(segment.seq));
    }
    std::ofstream index(dir / "index.csv", std::ios::binary | std::ios::app);
    index << entry.seq << ',' << entry.span.start().unix_ms() << ',' << entry.span.end().unix_ms()
          << ',' << entry.length_bytes << '\n';
    if (!index) throw Error(Errc::IoFailure, "append index for " + segment.source_id);
  } else {
    src.in_memory[segment.seq] = segment.bytes;
  }
  src.entries.push_back(entry);
}

std::vector<std::string> SegmentArchive::sources() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, src] : sources_) out.push_back(id);
  return out;
}

std::vector<IndexEntry> SegmentArchive::index(const std::string& source_id) const {
  std::shared_lock lock(mutex_);
  const auto it = sources_.find(source_id);
  if (it == sources_.end()) throw Error(Errc::UnknownSource, source_id);
  return it->second.entries;
}

Bytes SegmentArchive::read_segment(const std::string& source_id, std::int64_t seq) const {
  std::shared_lock lock(mutex_);
  const auto it = sources_.find(source_id);
  if (it == sources_.end()) throw Error(Errc::UnknownSource, source_id);
  if (!root_) {
    const auto seg = it->second.in_memory.find(seq);
    if (seg == it->second.in_memory.end()) throw Error(Errc::IoFailure, "missing segment");
    return seg->second;
  }
  return read_file(segment_path(source_id, seq), Errc::IoFailure);
}

Clip retrieve_clip(const SegmentArchive& archive, const ClipRequest& request) {
  const auto entries = archive.index(request.source_id);
  const std::int64_t a = request.range.start().unix_ms();
  const std::int64_t b = request.range.end().unix_ms();
  const bool point = a == b;

  Clip clip;
  clip.manifest.source_id = request.source_id;
  for (const auto& entry : entries) {
    const std::int64_t s = entry.span.start().unix_ms();
    const std::int64_t e = entry.span.end().unix_ms();
    const std::int64_t lo = std::max(s, a);
    const std::int64_t hi = std::min(e, b);
    const bool overlaps = point ? (s <= a && a < e) : lo < hi;
    if (!overlaps) continue;

    const std::int64_t first = byte_at(entry.length_bytes, s, e, lo);
    const std::int64_t last = point ? first : byte_at(entry.length_bytes, s, e, hi);
    const Bytes bytes = archive.read_segment(request.source_id, entry.seq);
    clip.bytes.append(bytes, static_cast<std::size_t>(first), static_cast<std::size_t>(last - first));
    clip.manifest.entries.push_back(ManifestEntry{
        entry.seq, TimeSpan(Timestamp::from_unix_ms(lo), Timestamp::from_unix_ms(point ? lo : hi)),
        first, last - first});
  }
  if (clip.manifest.entries.empty()) {
    throw Error(Errc::NoDataInRange, request.source_id + " " + format_timestamp(request.range.start()) +
                                         ".." + format_timestamp(request.range.end()));
  }
  clip.manifest.served = TimeSpan(clip.manifest.entries.front().piece.start(),
                                  clip.manifest.entries.back().piece.end());
  return clip;
}

}  // namespace dmp::av
