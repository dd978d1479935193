#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace dmp {

/// Absolute UTC instant, millisecond precision, counted from the Unix epoch.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  static constexpr Timestamp from_unix_ms(std::int64_t ms) { return Timestamp{ms}; }

  constexpr std::int64_t unix_ms() const { return ms_; }

  constexpr Timestamp plus_ms(std::int64_t delta) const { return Timestamp{ms_ + delta}; }

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;

 private:
  constexpr explicit Timestamp(std::int64_t ms) : ms_(ms) {}
  std::int64_t ms_ = 0;
};

/// Closed-open or closed interval semantics are decided by the caller; the
/// type only guarantees start <= end.
class TimeSpan {
 public:
  TimeSpan() = default;
  /// Throws Error(InvalidTimeSpan) if end < start.
  TimeSpan(Timestamp start, Timestamp end);

  Timestamp start() const { return start_; }
  Timestamp end() const { return end_; }
  std::int64_t length_ms() const { return end_.unix_ms() - start_.unix_ms(); }

  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;

 private:
  Timestamp start_;
  Timestamp end_;
};

/// Parses "YYYY-MM-DDTHH:MM:SS[.f{1,3}]Z". Numeric offsets are rejected with
/// NonUtcOffset, anything else malformed with MalformedTimestamp.
Timestamp parse_timestamp(std::string_view text);

/// Canonical form "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_timestamp(Timestamp t);

}  // namespace dmp
