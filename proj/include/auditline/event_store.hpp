#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "auditline/clock.hpp"
#include "auditline/event.hpp"
#include "auditline/errors.hpp"

namespace auditline {

struct ChainReport {
  bool valid = true;
  std::optional<std::uint64_t> first_bad_sequence;
  std::uint64_t events_checked = 0;
};

// Strict read of a log file: one canonical-JSON event per LF-terminated line.
// The whole read is rejected on the first malformed or non-canonical line
// (ParseError) or on any sequence gap or duplicate (IntegrityError). A
// partial trailing line (no final newline) is malformed by definition.
inline std::vector<Event> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    throw StorageError("cannot open log file: " + path.string());
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::vector<Event> events;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    ++line_no;
    const std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) {
      throw ParseError(line_no, "partial trailing line (missing newline)");
    }
    const std::string line = content.substr(pos, eol - pos);
    pos = eol + 1;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    Event event = event_from_json(j, line_no);
    // The stored line must be bit-exact canonical; anything else is tampering
    // or a foreign writer.
    if (canonical_dump(j) != line) {
      throw ParseError(line_no, "line is not in canonical form");
    }
    if (event.sequence != events.size()) {
      throw IntegrityError(line_no, "sequence " + std::to_string(event.sequence) +
                                        " where " + std::to_string(events.size()) +
                                        " was expected");
    }
    events.push_back(std::move(event));
  }
  return events;
}

// Recomputes every hash and prev_hash link; reports the first divergence.
inline ChainReport verify_chain(const std::vector<Event>& events) {
  ChainReport report;
  std::string expected_prev{kGenesisHash};
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& event = events[i];
    report.events_checked = i + 1;
    if (event.sequence != i || event.prev_hash != expected_prev ||
        compute_event_hash(event) != event.hash) {
      report.valid = false;
      report.first_bad_sequence = i;
      return report;
    }
    expected_prev = event.hash;
  }
  report.valid = true;
  return report;
}

// Append-only writer over an events.jsonl file. Single writer by contract:
// the orchestrator serializes appends; readers of a flushed file are safe.
class EventStore {
 public:
  // Creates an empty log. Fails if the file already exists.
  static EventStore create(const std::filesystem::path& path,
                           const Clock& clock) {
    if (std::filesystem::exists(path)) {
      throw StorageError("log file already exists: " + path.string());
    }
    std::ofstream touch(path, std::ios::binary);
    if (!touch.is_open()) {
      throw StorageError("cannot create log file: " + path.string());
    }
    return EventStore(path, clock, {});
  }

  // Opens an existing log; the stored chain must verify.
  static EventStore open(const std::filesystem::path& path, const Clock& clock) {
    std::vector<Event> events = read_all(path);
    const ChainReport report = verify_chain(events);
    if (!report.valid) {
      throw IntegrityError(*report.first_bad_sequence + 1,
                           "hash chain invalid at sequence " +
                               std::to_string(*report.first_bad_sequence));
    }
    return EventStore(path, clock, std::move(events));
  }

  // Assigns the next sequence and chain fields, persists one line and
  // flushes before returning.
  const Event& append(const EventDraft& draft) {
    Event event;
    event.sequence = events_.size();
    event.timestamp = clock_->now_iso8601();
    event.actor = draft.actor;
    event.kind = draft.kind;
    event.payload = draft.payload;
    event.prev_hash = events_.empty() ? std::string(kGenesisHash)
                                      : events_.back().hash;
    event.hash = compute_event_hash(event);

    const std::string line = canonical_dump(event.to_json());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out.is_open()) {
      throw StorageError("cannot open log file for append: " + path_.string());
    }
    out << line << '\n';
    out.flush();
    if (!out.good()) {
      throw StorageError("write failed for log file: " + path_.string());
    }
    events_.push_back(std::move(event));
    return events_.back();
  }

  const std::vector<Event>& events() const { return events_; }
  const std::filesystem::path& path() const { return path_; }
  std::uint64_t size() const { return events_.size(); }

 private:
  EventStore(std::filesystem::path path, const Clock& clock,
             std::vector<Event> events)
      : path_(std::move(path)), clock_(&clock), events_(std::move(events)) {}

  std::filesystem::path path_;
  const Clock* clock_;
  std::vector<Event> events_;
};

}  // namespace auditline
