#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "dmp/time.hpp"

namespace dmp {

/// Byte sequences travel as std::string; no text encoding is implied.
using Bytes = std::string;

/// Tree-structured document (string/number/boolean/list/subtree nodes).
using Document = nlohmann::json;

enum class SdmKind { MediaEvent, Alert, Anomaly };
enum class Layer { Edge, Fog, Cloud };
enum class Verdict { Confirmed, Rejected };
enum class VerificationState { Unset, Confirmed, Rejected };

std::string_view to_string(SdmKind kind) noexcept;
std::string_view to_string(Layer layer) noexcept;
std::string_view to_string(VerificationState state) noexcept;
std::string_view to_string(Verdict verdict) noexcept;

SdmKind parse_kind(std::string_view text);
Layer parse_layer(std::string_view text);

/// A result is stamped either with a single instant or with a start/end pair.
using When = std::variant<Timestamp, TimeSpan>;

/// Index key for a result: the instant itself, or the start of a span.
Timestamp primary_time(const When& when);

struct RawInferenceResult {
  std::string av_source_id;
  std::string result_id;
  std::optional<When> when;
  std::string producer;
  Document payload = Document::object();
};

struct SdmEntity {
  SdmKind kind = SdmKind::MediaEvent;
  std::string result_id;
  std::string av_source_id;
  When when;
  Layer origin_layer = Layer::Edge;
  VerificationState verified = VerificationState::Unset;
  Document attributes = Document::object();

  friend bool operator==(const SdmEntity&, const SdmEntity&) = default;
};

struct VerificationMessage {
  std::string result_id;
  Verdict verdict = Verdict::Confirmed;
  std::string verifier;
  Timestamp at;
};

// Canonical encoding: compact JSON, sibling keys sorted lexicographically,
// timestamps in canonical ISO-8601 with trailing "Z".
Bytes serialize_entity(const SdmEntity& entity);
SdmEntity deserialize_entity(std::string_view bytes);

Bytes serialize_raw(const RawInferenceResult& raw);
/// Raw results are accepted as received; missing mandatory fields are left
/// empty/absent so the relay can report them.
RawInferenceResult deserialize_raw(std::string_view bytes);

Document when_to_document(const When& when);
When when_from_document(const Document& doc);

}  // namespace dmp
