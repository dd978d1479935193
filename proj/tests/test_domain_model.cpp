#include <doctest.h>

#include <random>

#include "dmp/entity.hpp"
#include "dmp/error.hpp"
#include "dmp/time.hpp"

using namespace dmp;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::IoFailure;
}

SdmEntity minimal_event() {
  SdmEntity e;
  e.kind = SdmKind::MediaEvent;
  e.result_id = "r-1";
  e.av_source_id = "cam1";
  e.when = parse_timestamp("2023-01-15T10:30:00Z");
  return e;
}

}  // namespace

TEST_CASE("parse_timestamp grammar") {
  CHECK(parse_timestamp("2023-01-15T10:30:00Z").unix_ms() == 1673778600000);
  CHECK(parse_timestamp("2000-02-29T23:59:59.999Z").unix_ms() == 951868799999);
  CHECK(parse_timestamp("1969-12-31T23:59:59.5Z").unix_ms() == -500);
  CHECK(parse_timestamp("2023-01-15T10:30:00.1Z").unix_ms() == 1673778600100);
  CHECK(code_of([] { parse_timestamp("2023-01-15T10:30:00+02:00"); }) == Errc::NonUtcOffset);
  CHECK(code_of([] { parse_timestamp("2023-01-15T10:30:00-00:00"); }) == Errc::NonUtcOffset);
  CHECK(code_of([] { parse_timestamp("2023-13-40T99:00:00Z"); }) == Errc::MalformedTimestamp);
  CHECK(code_of([] { parse_timestamp("2023-02-29T00:00:00Z"); }) == Errc::MalformedTimestamp);
  CHECK(code_of([] { parse_timestamp("2023-01-15 10:30:00Z"); }) == Errc::MalformedTimestamp);
  CHECK(code_of([] { parse_timestamp("2023-01-15T10:30:00.1234Z"); }) == Errc::MalformedTimestamp);
  CHECK(code_of([] { parse_timestamp(""); }) == Errc::MalformedTimestamp);
}

TEST_CASE("format_timestamp round-trips and preserves order") {
  CHECK(format_timestamp(parse_timestamp("2023-01-15T10:30:00Z")) == "2023-01-15T10:30:00.000Z");
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<std::int64_t> dist(-2'000'000'000'000, 13'000'000'000'000);
  for (int i = 0; i < 2000; ++i) {
    const auto a = Timestamp::from_unix_ms(dist(gen));
    const auto b = Timestamp::from_unix_ms(dist(gen));
    const auto fa = format_timestamp(a);
    CHECK(parse_timestamp(fa) == a);
    // Canonical strings sort like the instants they denote.
    CHECK((fa < format_timestamp(b)) == (a < b));
  }
}

TEST_CASE("TimeSpan rejects reversed bounds") {
  const auto t = Timestamp::from_unix_ms(10);
  CHECK(TimeSpan(t, t).length_ms() == 0);
  CHECK(code_of([&] { TimeSpan(t, t.plus_ms(-1)); }) == Errc::InvalidTimeSpan);
}

TEST_CASE("entity round-trip") {
  const auto e = minimal_event();
  CHECK(deserialize_entity(serialize_entity(e)) == e);

  auto span = e;
  span.when = TimeSpan(parse_timestamp("2023-01-15T10:30:00Z"), parse_timestamp("2023-01-15T10:30:02.250Z"));
  const auto back = deserialize_entity(serialize_entity(span));
  CHECK(back == span);
  CHECK(std::get<TimeSpan>(back.when).length_ms() == 2250);

  auto alert = e;
  alert.kind = SdmKind::Alert;
  alert.origin_layer = Layer::Cloud;
  alert.verified = VerificationState::Confirmed;
  alert.attributes = {{"severity", "critical"}, {"boxes", {1, 2, 3}}};
  CHECK(deserialize_entity(serialize_entity(alert)) == alert);
}

TEST_CASE("canonical bytes ignore source key order") {
  auto a = minimal_event();
  auto b = minimal_event();
  a.attributes = Document::parse(R"({"zeta":1,"alpha":{"y":2,"x":3}})");
  b.attributes = Document::parse(R"({"alpha":{"x":3,"y":2},"zeta":1})");
  CHECK(serialize_entity(a) == serialize_entity(b));
  const auto parsed = deserialize_entity(R"({"when":{"at":"2023-01-15T10:30:00Z"},"verified":"unset",)"
                                         R"("result_id":"r-1","origin_layer":"edge","kind":"MediaEvent",)"
                                         R"("av_source_id":"cam1","attributes":{}})");
  CHECK(serialize_entity(parsed) == serialize_entity(minimal_event()));
}

TEST_CASE("deserialize errors") {
  const auto bytes = serialize_entity(minimal_event());
  CHECK(code_of([&] { deserialize_entity(bytes.substr(0, bytes.size() / 2)); }) == Errc::MalformedDocument);
  CHECK(code_of([] { deserialize_entity("[]"); }) == Errc::MalformedDocument);
  auto doc = Document::parse(bytes);
  doc.erase("result_id");
  try {
    deserialize_entity(doc.dump());
    FAIL("missing result_id accepted");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::MissingMandatoryField);
    CHECK(err.detail() == "result_id");
  }
}

TEST_CASE("round-trip property over generated entities") {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 500; ++i) {
    SdmEntity e;
    e.kind = static_cast<SdmKind>(gen() % 3);
    e.origin_layer = static_cast<Layer>(gen() % 3);
    e.verified = static_cast<VerificationState>(gen() % 3);
    e.result_id = "id-" + std::to_string(gen() % 100000);
    e.av_source_id = "src" + std::to_string(gen() % 7);
    const auto t = Timestamp::from_unix_ms(static_cast<std::int64_t>(gen() % 4'000'000'000'000));
    if (gen() % 2) {
      e.when = t;
    } else {
      e.when = TimeSpan(t, t.plus_ms(static_cast<std::int64_t>(gen() % 100000)));
    }
    e.attributes["n"] = static_cast<std::int64_t>(gen() % 1000);
    e.attributes["label"] = std::string(1 + gen() % 5, static_cast<char>('a' + gen() % 26));
    CHECK(deserialize_entity(serialize_entity(e)) == e);
  }
}

TEST_CASE("raw result round-trip is lenient") {
  RawInferenceResult raw;
  raw.av_source_id = "mic1";
  raw.result_id = "m-1";
  raw.producer = "audio-analyzer";
  raw.when = parse_timestamp("2023-01-15T10:30:00Z");
  raw.payload = {{"label", "siren"}};
  const auto back = deserialize_raw(serialize_raw(raw));
  CHECK(back.av_source_id == raw.av_source_id);
  CHECK(back.result_id == raw.result_id);
  CHECK(back.producer == raw.producer);
  CHECK(back.when == raw.when);
  CHECK(back.payload == raw.payload);

  const auto partial = deserialize_raw(R"({"payload":{}})");
  CHECK(partial.av_source_id.empty());
  CHECK(!partial.when);
}
