#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "auditline/canonical.hpp"
#include "auditline/errors.hpp"
#include "auditline/sha256.hpp"

namespace auditline {

inline constexpr std::string_view kGenesisHash =
    "0000000000000000000000000000000000000000000000000000000000000000";

enum class EventKind {
  run_initialized,
  task_claimed,
  task_completed,
  task_blocked,
  task_unblocked,
  finding_recorded,
  artifact_written,
  phase_advanced,
  verification_recorded,
};

inline std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::run_initialized: return "run_initialized";
    case EventKind::task_claimed: return "task_claimed";
    case EventKind::task_completed: return "task_completed";
    case EventKind::task_blocked: return "task_blocked";
    case EventKind::task_unblocked: return "task_unblocked";
    case EventKind::finding_recorded: return "finding_recorded";
    case EventKind::artifact_written: return "artifact_written";
    case EventKind::phase_advanced: return "phase_advanced";
    case EventKind::verification_recorded: return "verification_recorded";
  }
  return "unknown";
}

inline std::optional<EventKind> event_kind_from_string(std::string_view s) {
  if (s == "run_initialized") return EventKind::run_initialized;
  if (s == "task_claimed") return EventKind::task_claimed;
  if (s == "task_completed") return EventKind::task_completed;
  if (s == "task_blocked") return EventKind::task_blocked;
  if (s == "task_unblocked") return EventKind::task_unblocked;
  if (s == "finding_recorded") return EventKind::finding_recorded;
  if (s == "artifact_written") return EventKind::artifact_written;
  if (s == "phase_advanced") return EventKind::phase_advanced;
  if (s == "verification_recorded") return EventKind::verification_recorded;
  return std::nullopt;
}

inline bool is_hex_digest(std::string_view s) {
  if (s.size() != 64) return false;
  for (const char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

// What an actor proposes to append: everything except the chain fields.
struct EventDraft {
  EventKind kind = EventKind::run_initialized;
  std::string actor;
  json payload = json::object();
};

// One admitted fact in the append-only log.
struct Event {
  std::uint64_t sequence = 0;
  std::string timestamp;  // ISO-8601 UTC
  std::string actor;
  EventKind kind = EventKind::run_initialized;
  json payload = json::object();
  std::string prev_hash;  // 64-char lowercase hex; genesis for sequence 0
  std::string hash;       // 64-char lowercase hex

  json to_json() const {
    json j;
    j["sequence"] = sequence;
    j["timestamp"] = timestamp;
    j["actor"] = actor;
    j["kind"] = to_string(kind);
    j["payload"] = payload;
    j["prev_hash"] = prev_hash;
    j["hash"] = hash;
    return j;
  }
};

// Canonical bytes of the event with the hash field absent; the hash input.
inline std::string canonical_bytes(const Event& event) {
  json j = event.to_json();
  j.erase("hash");
  return canonical_dump(j);
}

// hash = SHA-256(prev_hash bytes ++ canonical bytes of the hashless event).
inline std::string compute_event_hash(const Event& event) {
  Sha256 h;
  h.update(event.prev_hash);
  h.update(canonical_bytes(event));
  return to_hex(h.digest());
}

// Strict decode of a parsed log line: exact key set, exact types. Any
// deviation throws ParseError carrying the given 1-based line number.
inline Event event_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "event is not a JSON object");
  static const char* const kKeys[] = {"actor",   "hash",     "kind",     "payload",
                                      "prev_hash", "sequence", "timestamp"};
  for (const char* key : kKeys) {
    if (!j.contains(key)) {
      throw ParseError(line, std::string("missing field '") + key + "'");
    }
  }
  if (j.size() != 7) throw ParseError(line, "unexpected extra field");

  Event event;
  if (!j["sequence"].is_number_unsigned()) {
    throw ParseError(line, "sequence must be a non-negative integer");
  }
  event.sequence = j["sequence"].get<std::uint64_t>();
  for (const char* key : {"timestamp", "actor", "kind", "prev_hash", "hash"}) {
    if (!j[key].is_string()) {
      throw ParseError(line, std::string("field '") + key + "' must be a string");
    }
  }
  event.timestamp = j["timestamp"].get<std::string>();
  event.actor = j["actor"].get<std::string>();
  if (event.actor.empty()) throw ParseError(line, "actor must be non-empty");
  const auto kind = event_kind_from_string(j["kind"].get<std::string>());
  if (!kind) {
    throw ParseError(line, "unknown event kind '" +
                               j["kind"].get<std::string>() + "'");
  }
  event.kind = *kind;
  if (!j["payload"].is_object()) {
    throw ParseError(line, "payload must be an object");
  }
  event.payload = j["payload"];
  event.prev_hash = j["prev_hash"].get<std::string>();
  event.hash = j["hash"].get<std::string>();
  if (!is_hex_digest(event.prev_hash)) {
    throw ParseError(line, "prev_hash is not a 64-char lowercase hex digest");
  }
  if (!is_hex_digest(event.hash)) {
    throw ParseError(line, "hash is not a 64-char lowercase hex digest");
  }
  return event;
}

}  // namespace auditline
