#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "auditline/event_store.hpp"
#include "auditline/finding.hpp"
#include "auditline/registry.hpp"

namespace auditline {

enum class TaskStatus { todo, in_progress, done, blocked };

inline std::string to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::todo: return "todo";
    case TaskStatus::in_progress: return "in_progress";
    case TaskStatus::done: return "done";
    case TaskStatus::blocked: return "blocked";
  }
  return "todo";
}

inline std::optional<TaskStatus> task_status_from_string(std::string_view s) {
  if (s == "todo") return TaskStatus::todo;
  if (s == "in_progress") return TaskStatus::in_progress;
  if (s == "done") return TaskStatus::done;
  if (s == "blocked") return TaskStatus::blocked;
  return std::nullopt;
}

struct TaskView {
  std::string task_id;
  TaskStatus status = TaskStatus::todo;
  std::optional<std::string> owner;
  int phase = 0;
  std::string kind;
  std::optional<std::string> block_reason;

  json to_json() const {
    json j;
    j["task_id"] = task_id;
    j["status"] = to_string(status);
    if (owner) j["owner"] = *owner;
    j["phase"] = phase;
    j["kind"] = kind;
    if (block_reason) j["block_reason"] = *block_reason;
    return j;
  }
};

struct ArtifactRef {
  std::string written_by_task;
  std::uint64_t event_sequence = 0;

  json to_json() const {
    return json{{"written_by_task", written_by_task},
                {"event_sequence", event_sequence}};
  }
};

// Deterministic read-model of the log: same events, same state_hash, on any
// machine.
struct AuditState {
  std::map<std::string, TaskView> tasks;
  int current_phase = 1;
  std::vector<Finding> findings;
  std::map<std::string, ArtifactRef> artifacts;
  std::optional<std::uint64_t> last_sequence;
  std::string state_hash;

  const TaskView* find_task(const std::string& task_id) const {
    const auto it = tasks.find(task_id);
    return it == tasks.end() ? nullptr : &it->second;
  }

  std::map<TaskStatus, int> status_counts() const {
    std::map<TaskStatus, int> counts{{TaskStatus::todo, 0},
                                     {TaskStatus::in_progress, 0},
                                     {TaskStatus::done, 0},
                                     {TaskStatus::blocked, 0}};
    for (const auto& [id, view] : tasks) counts[view.status]++;
    return counts;
  }

  // Canonical serialization with state_hash absent; the state-hash input.
  json to_json_without_hash() const {
    json j;
    json tasks_json = json::object();
    for (const auto& [id, view] : tasks) tasks_json[id] = view.to_json();
    j["tasks"] = tasks_json;
    j["current_phase"] = current_phase;
    json findings_json = json::array();
    for (const auto& f : findings) findings_json.push_back(f.to_json());
    j["findings"] = findings_json;
    json artifacts_json = json::object();
    for (const auto& [path, ref] : artifacts) artifacts_json[path] = ref.to_json();
    j["artifacts"] = artifacts_json;
    if (last_sequence) j["last_sequence"] = *last_sequence;
    return j;
  }
};

inline std::string compute_state_hash(const AuditState& state) {
  return sha256_hex(canonical_dump(state.to_json_without_hash()));
}

namespace detail {

inline std::string payload_string(const Event& event, const char* key) {
  if (!event.payload.contains(key) || !event.payload.at(key).is_string()) {
    throw ProjectionError("event " + std::to_string(event.sequence) + " (" +
                          to_string(event.kind) + "): missing payload field '" +
                          key + "'");
  }
  return event.payload.at(key).get<std::string>();
}

inline TaskView& payload_task(AuditState& state, const Event& event) {
  const std::string task_id = payload_string(event, "task_id");
  const auto it = state.tasks.find(task_id);
  if (it == state.tasks.end()) {
    throw ProjectionError("event " + std::to_string(event.sequence) +
                          " references unknown task '" + task_id +
                          "' (registry/log mismatch)");
  }
  return it->second;
}

inline Severity severity_from_payload(const json& j, std::uint64_t seq) {
  const auto level = severity_level_from_string(
      j.at("level").get<std::string>());
  if (!level) {
    throw ProjectionError("event " + std::to_string(seq) +
                          ": unknown severity level");
  }
  Severity out;
  out.level = *level;
  const json& cia = j.at("cia_impact");
  auto dim = [&](const char* key) {
    const auto v = cia_level_from_string(cia.at(key).get<std::string>());
    if (!v) {
      throw ProjectionError("event " + std::to_string(seq) +
                            ": unknown CIA level");
    }
    return *v;
  };
  out.cia_impact.confidentiality = dim("confidentiality");
  out.cia_impact.integrity = dim("integrity");
  out.cia_impact.availability = dim("availability");
  return out;
}

}  // namespace detail

// Left fold of the verified log over the initial roadmap state. Pure; safe
// to call from any thread.
inline AuditState project(const std::vector<Event>& events,
                          const Registry& registry) {
  AuditState state;
  for (const auto& task : registry.tasks) {
    TaskView view;
    view.task_id = task.task_id;
    view.status = TaskStatus::todo;
    view.phase = task.phase;
    view.kind = task.kind;
    state.tasks[task.task_id] = std::move(view);
  }

  for (const Event& event : events) {
    switch (event.kind) {
      case EventKind::run_initialized:
        break;
      case EventKind::task_claimed: {
        TaskView& task = detail::payload_task(state, event);
        task.status = TaskStatus::in_progress;
        task.owner = event.actor;
        break;
      }
      case EventKind::task_completed: {
        TaskView& task = detail::payload_task(state, event);
        task.status = TaskStatus::done;
        task.owner = event.actor;
        task.block_reason.reset();
        break;
      }
      case EventKind::task_blocked: {
        TaskView& task = detail::payload_task(state, event);
        task.status = TaskStatus::blocked;
        task.owner = event.actor;
        task.block_reason = detail::payload_string(event, "reason");
        break;
      }
      case EventKind::task_unblocked: {
        TaskView& task = detail::payload_task(state, event);
        task.status = TaskStatus::todo;
        task.owner.reset();
        task.block_reason.reset();
        break;
      }
      case EventKind::finding_recorded: {
        TaskView& task = detail::payload_task(state, event);
        Finding finding;
        finding.task_id = task.task_id;
        finding.check_id = detail::payload_string(event, "check_id");
        const auto status = check_status_from_string(
            detail::payload_string(event, "status"));
        if (!status) {
          throw ProjectionError("event " + std::to_string(event.sequence) +
                                ": unknown check status");
        }
        finding.status = *status;
        if (event.payload.contains("severity")) {
          finding.severity = detail::severity_from_payload(
              event.payload.at("severity"), event.sequence);
        }
        if (event.payload.contains("evidence")) {
          for (const auto& e : event.payload.at("evidence")) {
            Evidence ev;
            ev.path = e.at("path").get<std::string>();
            if (e.contains("line")) ev.line = e.at("line").get<std::uint64_t>();
            ev.excerpt = e.value("excerpt", std::string{});
            finding.evidence.push_back(std::move(ev));
          }
        }
        finding.explanation = event.payload.value("explanation", std::string{});
        finding.remediation = event.payload.value("remediation", std::string{});
        finding.event_sequence = event.sequence;
        state.findings.push_back(std::move(finding));
        break;
      }
      case EventKind::artifact_written: {
        TaskView& task = detail::payload_task(state, event);
        const std::string path = detail::payload_string(event, "path");
        state.artifacts[path] =
            ArtifactRef{task.task_id, event.sequence};
        break;
      }
      case EventKind::phase_advanced: {
        const int to = event.payload.at("to").get<int>();
        if (to < state.current_phase) {
          throw ProjectionError("event " + std::to_string(event.sequence) +
                                ": phase may never decrease");
        }
        if (to > kPhaseCount) {
          throw ProjectionError("event " + std::to_string(event.sequence) +
                                ": phase beyond roadmap");
        }
        state.current_phase = to;
        break;
      }
      case EventKind::verification_recorded:
        // Meta-fact about the projection itself; folds into last_sequence
        // only, so its recorded hash can match the state it lands in.
        break;
    }
    state.last_sequence = event.sequence;
  }

  state.state_hash = compute_state_hash(state);
  return state;
}

enum class MatchesRecorded { yes, no, not_applicable };

inline std::string to_string(MatchesRecorded m) {
  switch (m) {
    case MatchesRecorded::yes: return "yes";
    case MatchesRecorded::no: return "no";
    case MatchesRecorded::not_applicable: return "not_applicable";
  }
  return "not_applicable";
}

struct VerificationResult {
  ChainReport chain;
  std::string state_hash;  // empty when projection was skipped
  MatchesRecorded matches_recorded = MatchesRecorded::not_applicable;
  std::string detail;

  bool ok() const {
    return chain.valid && matches_recorded != MatchesRecorded::no;
  }
};

// Replays the log from scratch: chain verification, full reprojection, and
// comparison against the hash inside the latest verification_recorded event
// (projected over the prefix that event closes). Failures are reported, not
// thrown.
inline VerificationResult replay_verify(const std::filesystem::path& log_path,
                                        const Registry& registry) {
  VerificationResult result;
  std::vector<Event> events;
  try {
    events = read_all(log_path);
  } catch (const ParseError& e) {
    result.chain.valid = false;
    result.chain.first_bad_sequence = e.line() == 0 ? 0 : e.line() - 1;
    result.detail = e.what();
    return result;
  } catch (const IntegrityError& e) {
    result.chain.valid = false;
    result.chain.first_bad_sequence = e.line() == 0 ? 0 : e.line() - 1;
    result.detail = e.what();
    return result;
  } catch (const Error& e) {
    result.chain.valid = false;
    result.chain.first_bad_sequence = 0;
    result.detail = e.what();
    return result;
  }

  result.chain = verify_chain(events);
  if (!result.chain.valid) {
    result.detail = "hash chain diverges at sequence " +
                    std::to_string(*result.chain.first_bad_sequence);
    return result;  // projection skipped; the log is not trustworthy
  }

  const AuditState state = project(events, registry);
  result.state_hash = state.state_hash;

  // Latest verification_recorded event, if any.
  std::optional<std::size_t> latest;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].kind == EventKind::verification_recorded) latest = i;
  }
  if (!latest) {
    result.matches_recorded = MatchesRecorded::not_applicable;
    return result;
  }
  const std::string recorded =
      detail::payload_string(events[*latest], "state_hash");
  const std::vector<Event> prefix(events.begin(),
                                  events.begin() + *latest + 1);
  const AuditState prefix_state = project(prefix, registry);
  result.matches_recorded = prefix_state.state_hash == recorded
                                ? MatchesRecorded::yes
                                : MatchesRecorded::no;
  if (result.matches_recorded == MatchesRecorded::no) {
    result.detail = "recorded state hash " + recorded +
                    " does not match replayed hash " + prefix_state.state_hash;
  }
  return result;
}

}  // namespace auditline
