#include "dmp/entity.hpp"

#include "dmp/error.hpp"

namespace dmp {

std::string_view to_string(SdmKind kind) noexcept {
  switch (kind) {
    case SdmKind::MediaEvent: return "MediaEvent";
    case SdmKind::Alert: return "Alert";
    case SdmKind::Anomaly: return "Anomaly";
  }
  return "MediaEvent";
}

std::string_view to_string(Layer layer) noexcept {
  switch (layer) {
    case Layer::Edge: return "edge";
    case Layer::Fog: return "fog";
    case Layer::Cloud: return "cloud";
  }
  return "edge";
}

std::string_view to_string(VerificationState state) noexcept {
  switch (state) {
    case VerificationState::Unset: return "unset";
    case VerificationState::Confirmed: return "confirmed";
    case VerificationState::Rejected: return "rejected";
  }
  return "unset";
}

std::string_view to_string(Verdict verdict) noexcept {
  return verdict == Verdict::Confirmed ? "confirmed" : "rejected";
}

SdmKind parse_kind(std::string_view text) {
  if (text == "MediaEvent") return SdmKind::MediaEvent;
  if (text == "Alert") return SdmKind::Alert;
  if (text == "Anomaly") return SdmKind::Anomaly;
  throw Error(Errc::MalformedDocument, "unknown kind '" + std::string(text) + "'");
}

Layer parse_layer(std::string_view text) {
  if (text == "edge") return Layer::Edge;
  if (text == "fog") return Layer::Fog;
  if (text == "cloud") return Layer::Cloud;
  throw Error(Errc::MalformedDocument, "unknown layer '" + std::string(text) + "'");
}

namespace {

VerificationState parse_verification(std::string_view text) {
  if (text == "unset") return VerificationState::Unset;
  if (text == "confirmed") return VerificationState::Confirmed;
  if (text == "rejected") return VerificationState::Rejected;
  throw Error(Errc::MalformedDocument, "unknown verification state '" + std::string(text) + "'");
}

Document parse_document(std::string_view bytes) {
  Document doc = Document::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::MalformedDocument, "not a well-formed document");
  if (!doc.is_object()) throw Error(Errc::MalformedDocument, "top level must be an object");
  return doc;
}

const Document& require(const Document& doc, const char* field) {
  const auto it = doc.find(field);
  if (it == doc.end() || it->is_null()) throw Error(Errc::MissingMandatoryField, field);
  return *it;
}

std::string require_string(const Document& doc, const char* field) {
  const Document& v = require(doc, field);
  if (!v.is_string()) throw Error(Errc::MalformedDocument, std::string(field) + " must be a string");
  auto s = v.get<std::string>();
  if (s.empty()) throw Error(Errc::MissingMandatoryField, field);
  return s;
}

Timestamp timestamp_field(const Document& doc, const char* field) {
  const Document& v = require(doc, field);
  if (!v.is_string()) throw Error(Errc::MalformedDocument, std::string(field) + " must be a string");
  return parse_timestamp(v.get_ref<const std::string&>());
}

std::string optional_string(const Document& doc, const char* field) {
  const auto it = doc.find(field);
  if (it == doc.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

}  // namespace

Timestamp primary_time(const When& when) {
  if (const auto* span = std::get_if<TimeSpan>(&when)) return span->start();
  return std::get<Timestamp>(when);
}

Document when_to_document(const When& when) {
  if (const auto* span = std::get_if<TimeSpan>(&when)) {
    return {{"start", format_timestamp(span->start())}, {"end", format_timestamp(span->end())}};
  }
  return {{"at", format_timestamp(std::get<Timestamp>(when))}};
}

When when_from_document(const Document& doc) {
  if (!doc.is_object()) throw Error(Errc::MalformedDocument, "when must be an object");
  if (doc.contains("at")) return timestamp_field(doc, "at");
  if (doc.contains("start") || doc.contains("end")) {
    return TimeSpan(timestamp_field(doc, "start"), timestamp_field(doc, "end"));
  }
  throw Error(Errc::MissingMandatoryField, "when");
}

Bytes serialize_entity(const SdmEntity& entity) {
  // nlohmann::json objects are std::map backed, so dump() emits keys sorted.
  const Document doc = {
      {"kind", to_string(entity.kind)},
      {"result_id", entity.result_id},
      {"av_source_id", entity.av_source_id},
      {"when", when_to_document(entity.when)},
      {"origin_layer", to_string(entity.origin_layer)},
      {"verified", to_string(entity.verified)},
      {"attributes", entity.attributes.is_null() ? Document::object() : entity.attributes},
  };
  return doc.dump();
}

SdmEntity deserialize_entity(std::string_view bytes) {
  const Document doc = parse_document(bytes);
  SdmEntity e;
  e.result_id = require_string(doc, "result_id");
  e.av_source_id = require_string(doc, "av_source_id");
  e.kind = parse_kind(require_string(doc, "kind"));
  e.when = when_from_document(require(doc, "when"));
  e.origin_layer = parse_layer(require_string(doc, "origin_layer"));
  if (const auto it = doc.find("verified"); it != doc.end() && it->is_string()) {
    e.verified = parse_verification(it->get_ref<const std::string&>());
  }
  if (const auto it = doc.find("attributes"); it != doc.end()) {
    if (!it->is_object()) throw Error(Errc::MalformedDocument, "attributes must be an object");
    e.attributes = *it;
  }
  return e;
}

Bytes serialize_raw(const RawInferenceResult& raw) {
  Document doc = {
      {"result_id", raw.result_id},
      {"av_source_id", raw.av_source_id},
      {"producer", raw.producer},
      {"payload", raw.payload.is_null() ? Document::object() : raw.payload},
  };
  if (raw.when) {
    if (const auto* span = std::get_if<TimeSpan>(&*raw.when)) {
      doc["start"] = format_timestamp(span->start());
      doc["end"] = format_timestamp(span->end());
    } else {
      doc["timestamp"] = format_timestamp(std::get<Timestamp>(*raw.when));
    }
  }
  return doc.dump();
}

RawInferenceResult deserialize_raw(std::string_view bytes) {
  const Document doc = parse_document(bytes);
  RawInferenceResult raw;
  raw.result_id = optional_string(doc, "result_id");
  raw.av_source_id = optional_string(doc, "av_source_id");
  raw.producer = optional_string(doc, "producer");
  if (doc.contains("timestamp")) {
    raw.when = timestamp_field(doc, "timestamp");
  } else if (doc.contains("start") || doc.contains("end")) {
    raw.when = TimeSpan(timestamp_field(doc, "start"), timestamp_field(doc, "end"));
  }
  if (const auto it = doc.find("payload"); it != doc.end() && it->is_object()) raw.payload = *it;
  return raw;
}

}  // namespace dmp
