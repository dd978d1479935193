#include "dmp/time.hpp"

#include <array>
#include <cstdio>

#include "dmp/error.hpp"

namespace dmp {

namespace {

// Proleptic Gregorian conversions (Hinnant's days_from_civil / civil_from_days).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

constexpr bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

constexpr unsigned days_in_month(std::int64_t y, unsigned m) {
  constexpr std::array<unsigned, 12> days{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : days[m - 1];
}

[[noreturn]] void malformed(std::string_view text) {
  throw Error(Errc::MalformedTimestamp, std::string(text));
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  unsigned digits(std::size_t n) {
    unsigned v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pos_ >= text_.size() || text_[pos_] < '0' || text_[pos_] > '9') malformed(text_);
      v = v * 10 + static_cast<unsigned>(text_[pos_++] - '0');
    }
    return v;
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) malformed(text_);
    ++pos_;
  }

  bool peek(char c) const { return pos_ < text_.size() && text_[pos_] == c; }
  bool peek_digit() const { return pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9'; }
  void skip() { ++pos_; }
  bool done() const { return pos_ == text_.size(); }
  std::string_view rest() const { return text_.substr(pos_); }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

TimeSpan::TimeSpan(Timestamp start, Timestamp end) : start_(start), end_(end) {
  if (end < start) {
    throw Error(Errc::InvalidTimeSpan,
                format_timestamp(start) + " > " + format_timestamp(end));
  }
}

Timestamp parse_timestamp(std::string_view text) {
  Cursor c(text);
  const unsigned year = c.digits(4);
  c.expect('-');
  const unsigned month = c.digits(2);
  c.expect('-');
  const unsigned day = c.digits(2);
  c.expect('T');
  const unsigned hour = c.digits(2);
  c.expect(':');
  const unsigned minute = c.digits(2);
  c.expect(':');
  const unsigned second = c.digits(2);

  unsigned millis = 0;
  if (c.peek('.')) {
    c.skip();
    unsigned scale = 100;
    std::size_t n = 0;
    while (c.peek_digit()) {
      if (n == 3) malformed(text);
      millis += c.digits(1) * scale;
      scale /= 10;
      ++n;
    }
    if (n == 0) malformed(text);
  }

  if (c.peek('+') || c.peek('-')) {
    // Validate the offset shape so that garbage still reports as malformed.
    const auto rest = c.rest();
    const bool offset_shape = rest.size() == 6 && rest[3] == ':';
    if (!offset_shape) malformed(text);
    throw Error(Errc::NonUtcOffset, std::string(text));
  }
  c.expect('Z');
  if (!c.done()) malformed(text);

  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month) || hour > 23 ||
      minute > 59 || second > 59) {
    malformed(text);
  }

  const std::int64_t days = days_from_civil(year, month, day);
  const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second;
  return Timestamp::from_unix_ms(secs * 1000 + millis);
}

std::string format_timestamp(Timestamp t) {
  const std::int64_t ms = t.unix_ms();
  std::int64_t days = ms / 86'400'000;
  std::int64_t rem = ms % 86'400'000;
  if (rem < 0) {
    rem += 86'400'000;
    --days;
  }
  const Civil civil = civil_from_days(days);
  const auto hour = rem / 3'600'000;
  const auto minute = rem / 60'000 % 60;
  const auto second = rem / 1000 % 60;
  const auto millis = rem % 1000;

  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ",
                static_cast<long long>(civil.year), civil.month, civil.day,
                static_cast<long long>(hour), static_cast<long long>(minute),
                static_cast<long long>(second), static_cast<long long>(millis));
  return buf.data();
}

}  // namespace dmp
