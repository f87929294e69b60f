#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "auditline/event.hpp"
#include "auditline/projection.hpp"
#include "auditline/registry.hpp"

namespace auditline {

enum class Action { claim, complete, block };

inline std::string to_string(Action action) {
  switch (action) {
    case Action::claim: return "claim";
    case Action::complete: return "complete";
    case Action::block: return "block";
  }
  return "claim";
}

struct FileUpdate {
  std::string path;
  std::string content;
};

// A structured agent output awaiting fail-closed validation. Exactly one
// action; the complete-only and block-only fields are empty otherwise.
struct Intention {
  Action action = Action::claim;
  std::string task_id;
  std::string actor;
  TaskStatus prior_status = TaskStatus::todo;
  std::vector<CheckResult> checks;       // complete only
  std::vector<FileUpdate> file_updates;  // complete only
  std::vector<CheckResult> findings;     // complete only; status=fail each
  std::string reason;                    // block only
};

enum class RejectionCode {
  schema_violation,
  invalid_transition,
  status_mismatch,
  lock_violation,
  boundary_violation,
  compound_action,
  done_reopen,
  unknown_task,
};

inline std::string to_string(RejectionCode code) {
  switch (code) {
    case RejectionCode::schema_violation: return "schema_violation";
    case RejectionCode::invalid_transition: return "invalid_transition";
    case RejectionCode::status_mismatch: return "status_mismatch";
    case RejectionCode::lock_violation: return "lock_violation";
    case RejectionCode::boundary_violation: return "boundary_violation";
    case RejectionCode::compound_action: return "compound_action";
    case RejectionCode::done_reopen: return "done_reopen";
    case RejectionCode::unknown_task: return "unknown_task";
  }
  return "schema_violation";
}

struct Rejection {
  RejectionCode code = RejectionCode::schema_violation;
  std::string detail;
};

// The task state machine, total over (status, action). Legal transitions:
// claim-before-work and complete-after-work; everything else is invalid.
inline std::optional<TaskStatus> transition(TaskStatus status, Action action) {
  if (status == TaskStatus::todo && action == Action::claim) {
    return TaskStatus::in_progress;
  }
  if (status == TaskStatus::in_progress && action == Action::complete) {
    return TaskStatus::done;
  }
  if (status == TaskStatus::in_progress && action == Action::block) {
    return TaskStatus::blocked;
  }
  return std::nullopt;
}

struct Boundary {
  std::vector<std::string> allowed_path_prefixes;
};

inline Boundary boundary_for_task(const Registry& registry,
                                  const std::string& task_id) {
  Boundary boundary;
  if (const TaskRecord* task = registry.find_task(task_id)) {
    boundary.allowed_path_prefixes = task->boundary;
  }
  return boundary;
}

// Relative, forward-slash, no dot segments; anything else has no place in a
// report artifact path.
inline std::optional<std::string> normalize_artifact_path(const std::string& path) {
  if (path.empty() || path.front() == '/' ||
      path.find('\\') != std::string::npos) {
    return std::nullopt;
  }
  std::vector<std::string> segments;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const std::size_t sep = std::min(path.find('/', pos), path.size());
    const std::string segment = path.substr(pos, sep - pos);
    if (segment.empty() || segment == "." || segment == "..") {
      return std::nullopt;
    }
    segments.push_back(segment);
    pos = sep + 1;
  }
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '/';
    out += segments[i];
  }
  return out;
}

namespace intent {

// --- strict wire-format parsing -------------------------------------------

// SAX handler that builds the DOM while rejecting duplicate object keys;
// nlohmann's default parser silently keeps the last duplicate, which would
// let two conflicting fields collapse into one.
class StrictDomHandler : public nlohmann::detail::json_sax_dom_parser<json> {
 public:
  using Base = nlohmann::detail::json_sax_dom_parser<json>;

  explicit StrictDomHandler(json& j) : Base(j, false) {}

  bool start_object(std::size_t elements) {
    key_stack_.emplace_back();
    return Base::start_object(elements);
  }
  bool end_object() {
    key_stack_.pop_back();
    return Base::end_object();
  }
  bool key(json::string_t& val) {
    if (!key_stack_.empty() && !key_stack_.back().insert(val).second) {
      duplicate_key_ = val;
      return false;
    }
    return Base::key(val);
  }

  const std::optional<std::string>& duplicate_key() const {
    return duplicate_key_;
  }

 private:
  std::vector<std::set<std::string>> key_stack_;
  std::optional<std::string> duplicate_key_;
};

inline Rejection schema_error(const std::string& detail) {
  return Rejection{RejectionCode::schema_violation, detail};
}

inline bool expect_keys(const json& obj, const std::set<std::string>& required,
                        const std::set<std::string>& optional,
                        const std::string& where, std::string& detail) {
  for (const auto& key : required) {
    if (!obj.contains(key)) {
      detail = where + ": missing field '" + key + "'";
      return false;
    }
  }
  for (const auto& [key, value] : obj.items()) {
    if (!required.count(key) && !optional.count(key)) {
      detail = where + ": unknown field '" + key + "'";
      return false;
    }
  }
  return true;
}

inline std::optional<Severity> parse_severity_strict(const json& j,
                                                     std::string& detail) {
  if (!j.is_object()) {
    detail = "severity must be an object";
    return std::nullopt;
  }
  std::string d;
  if (!expect_keys(j, {"level", "cia_impact"}, {}, "severity", d)) {
    detail = d;
    return std::nullopt;
  }
  if (!j.at("level").is_string()) {
    detail = "severity.level must be a string";
    return std::nullopt;
  }
  const auto level = severity_level_from_string(j.at("level").get<std::string>());
  if (!level) {
    detail = "severity.level must be one of CRITICAL/HIGH/MEDIUM/LOW/INFO";
    return std::nullopt;
  }
  const json& cia = j.at("cia_impact");
  if (!cia.is_object() ||
      !expect_keys(cia, {"confidentiality", "integrity", "availability"}, {},
                   "cia_impact", d)) {
    detail = d.empty() ? "cia_impact must be an object" : d;
    return std::nullopt;
  }
  Severity out;
  out.level = *level;
  auto dim = [&](const char* key, CiaLevel& slot) {
    if (!cia.at(key).is_string()) return false;
    const auto v = cia_level_from_string(cia.at(key).get<std::string>());
    if (!v) return false;
    slot = *v;
    return true;
  };
  if (!dim("confidentiality", out.cia_impact.confidentiality) ||
      !dim("integrity", out.cia_impact.integrity) ||
      !dim("availability", out.cia_impact.availability)) {
    detail = "cia_impact values must be none/partial/full";
    return std::nullopt;
  }
  if (out.level == SeverityLevel::INFO && !out.cia_impact.all_none()) {
    detail = "INFO severity requires all-none CIA impact";
    return std::nullopt;
  }
  return out;
}

inline std::optional<CheckResult> parse_check_result(const json& j,
                                                     bool finding,
                                                     std::string& detail) {
  const std::string where = finding ? "finding" : "check";
  if (!j.is_object()) {
    detail = where + " entries must be objects";
    return std::nullopt;
  }
  if (!expect_keys(j, {"check_id", "status", "evidence", "explanation",
                       "remediation"},
                   {"severity"}, where, detail)) {
    return std::nullopt;
  }
  CheckResult out;
  if (!j.at("check_id").is_string() ||
      j.at("check_id").get<std::string>().empty()) {
    detail = where + ".check_id must be a non-empty string";
    return std::nullopt;
  }
  out.check_id = j.at("check_id").get<std::string>();
  if (!j.at("status").is_string()) {
    detail = where + ".status must be a string";
    return std::nullopt;
  }
  const auto status = check_status_from_string(j.at("status").get<std::string>());
  if (!status) {
    detail = where + ".status must be pass/fail/not_applicable";
    return std::nullopt;
  }
  out.status = *status;
  if (!j.at("evidence").is_array()) {
    detail = where + ".evidence must be an array";
    return std::nullopt;
  }
  for (const auto& e : j.at("evidence")) {
    if (!e.is_object() ||
        !expect_keys(e, {"path", "excerpt"}, {"line"}, "evidence", detail)) {
      if (detail.empty()) detail = "evidence entries must be objects";
      return std::nullopt;
    }
    Evidence ev;
    if (!e.at("path").is_string() || e.at("path").get<std::string>().empty()) {
      detail = "evidence.path must be a non-empty string";
      return std::nullopt;
    }
    ev.path = e.at("path").get<std::string>();
    if (e.contains("line")) {
      if (!e.at("line").is_number_unsigned() ||
          e.at("line").get<std::uint64_t>() == 0) {
        detail = "evidence.line must be a positive integer";
        return std::nullopt;
      }
      ev.line = e.at("line").get<std::uint64_t>();
    }
    if (!e.at("excerpt").is_string()) {
      detail = "evidence.excerpt must be a string";
      return std::nullopt;
    }
    ev.excerpt = e.at("excerpt").get<std::string>();
    out.evidence.push_back(std::move(ev));
  }
  if (!j.at("explanation").is_string() || !j.at("remediation").is_string()) {
    detail = where + ": explanation and remediation must be strings";
    return std::nullopt;
  }
  out.explanation = j.at("explanation").get<std::string>();
  out.remediation = j.at("remediation").get<std::string>();
  if (j.contains("severity")) {
    out.severity = parse_severity_strict(j.at("severity"), detail);
    if (!out.severity) return std::nullopt;
  }

  // status=fail binds severity, evidence and remediation; pass and
  // not_applicable must not claim a severity.
  if (out.status == CheckStatus::fail) {
    if (!out.severity) {
      detail = where + " " + out.check_id + ": fail requires a severity";
      return std::nullopt;
    }
    if (out.evidence.empty()) {
      detail = where + " " + out.check_id + ": fail requires evidence";
      return std::nullopt;
    }
    if (out.remediation.empty()) {
      detail = where + " " + out.check_id + ": fail requires remediation";
      return std::nullopt;
    }
  } else if (out.severity) {
    detail = where + " " + out.check_id + ": severity is only valid on fail";
    return std::nullopt;
  }
  if (finding && out.status != CheckStatus::fail) {
    detail = "finding " + out.check_id + ": findings must have status fail";
    return std::nullopt;
  }
  return out;
}

}  // namespace intent

// Strict parse of one JSON object against the intention wire format: no
// unknown fields, no duplicate keys, no type coercion, no second object.
// Every deviation is a schema_violation.
inline std::variant<Intention, Rejection> parse_intention(const std::string& raw) {
  json doc;
  intent::StrictDomHandler handler(doc);
  const bool ok = json::sax_parse(raw, &handler, json::input_format_t::json, true);
  if (handler.duplicate_key()) {
    return intent::schema_error("duplicate field '" + *handler.duplicate_key() +
                                "'");
  }
  if (!ok) {
    return intent::schema_error(
        "not a single well-formed JSON object (compound emissions are "
        "rejected)");
  }
  if (!doc.is_object()) {
    return intent::schema_error("intention must be a JSON object");
  }

  std::string detail;
  static const std::set<std::string> kBase = {"action", "task_id", "actor",
                                              "prior_status"};
  for (const auto& key : kBase) {
    if (!doc.contains(key)) {
      return intent::schema_error("missing field '" + key + "'");
    }
    if (!doc.at(key).is_string()) {
      return intent::schema_error("field '" + key + "' must be a string");
    }
  }

  Intention out;
  const std::string action = doc.at("action").get<std::string>();
  if (action == "claim") {
    out.action = Action::claim;
  } else if (action == "complete") {
    out.action = Action::complete;
  } else if (action == "block") {
    out.action = Action::block;
  } else {
    return intent::schema_error("action must be claim/complete/block");
  }
  out.task_id = doc.at("task_id").get<std::string>();
  out.actor = doc.at("actor").get<std::string>();
  if (out.task_id.empty() || out.actor.empty()) {
    return intent::schema_error("task_id and actor must be non-empty");
  }
  const auto prior = task_status_from_string(
      doc.at("prior_status").get<std::string>());
  if (!prior) {
    return intent::schema_error(
        "prior_status must be todo/in_progress/done/blocked");
  }
  out.prior_status = *prior;

  if (out.action == Action::claim) {
    if (!intent::expect_keys(doc, {"action", "task_id", "actor", "prior_status"},
                             {}, "claim", detail)) {
      // claim carries no file updates, checks, findings or reason
      return intent::schema_error(detail);
    }
    return out;
  }

  if (out.action == Action::block) {
    if (!intent::expect_keys(doc,
                             {"action", "task_id", "actor", "prior_status",
                              "reason"},
                             {}, "block", detail)) {
      return intent::schema_error(detail);
    }
    if (!doc.at("reason").is_string() ||
        doc.at("reason").get<std::string>().empty()) {
      return intent::schema_error("block requires a non-empty reason");
    }
    out.reason = doc.at("reason").get<std::string>();
    return out;
  }

  // complete
  if (!intent::expect_keys(doc,
                           {"action", "task_id", "actor", "prior_status",
                            "checks", "file_updates", "findings"},
                           {}, "complete", detail)) {
    return intent::schema_error(detail);
  }
  if (!doc.at("checks").is_array() || doc.at("checks").empty()) {
    return intent::schema_error("complete requires at least one check result");
  }
  for (const auto& c : doc.at("checks")) {
    auto parsed = intent::parse_check_result(c, false, detail);
    if (!parsed) return intent::schema_error(detail);
    out.checks.push_back(std::move(*parsed));
  }
  if (!doc.at("file_updates").is_array() || doc.at("file_updates").empty()) {
    // A completion without its report artifact would break the artifact
    // chain for every dependent task.
    return intent::schema_error("complete requires at least one file update");
  }
  for (const auto& f : doc.at("file_updates")) {
    if (!f.is_object() ||
        !intent::expect_keys(f, {"path", "content"}, {}, "file_update",
                             detail)) {
      return intent::schema_error(
          detail.empty() ? "file_updates entries must be objects" : detail);
    }
    if (!f.at("path").is_string() || f.at("path").get<std::string>().empty() ||
        !f.at("content").is_string()) {
      return intent::schema_error(
          "file_update requires a non-empty path and string content");
    }
    out.file_updates.push_back(FileUpdate{f.at("path").get<std::string>(),
                                          f.at("content").get<std::string>()});
  }
  if (!doc.at("findings").is_array()) {
    return intent::schema_error("findings must be an array");
  }
  for (const auto& f : doc.at("findings")) {
    auto parsed = intent::parse_check_result(f, true, detail);
    if (!parsed) return intent::schema_error(detail);
    out.findings.push_back(std::move(*parsed));
  }
  return out;
}

using EventDrafts = std::vector<EventDraft>;

namespace intent {

// Cross-checks of a complete intention against the registry coverage and the
// deterministic builtin results. Returns a rejection detail or nothing.
inline std::optional<Rejection> check_complete_content(
    const Intention& intention, const TaskRecord& task, const Registry& registry,
    const std::vector<CheckResult>& builtin_results) {
  if (!task.domain_id) {
    if (!intention.findings.empty()) {
      return Rejection{RejectionCode::schema_violation,
                       "findings are only valid on domain audit tasks"};
    }
    for (const auto& check : intention.checks) {
      if (registry.find_check(check.check_id)) {
        return Rejection{RejectionCode::schema_violation,
                         "check '" + check.check_id +
                             "' belongs to a domain audit, not to task " +
                             task.task_id};
      }
    }
    return std::nullopt;
  }

  // Domain audit: the submitted checks must cover the domain's check set
  // exactly once each.
  const std::vector<CheckRecord> domain_checks =
      registry.checks_for_domain(*task.domain_id);
  std::set<std::string> expected;
  for (const auto& c : domain_checks) expected.insert(c.check_id);
  std::set<std::string> seen;
  for (const auto& check : intention.checks) {
    if (!expected.count(check.check_id)) {
      return Rejection{RejectionCode::schema_violation,
                       "check '" + check.check_id + "' is not part of domain '" +
                           *task.domain_id + "'"};
    }
    if (!seen.insert(check.check_id).second) {
      return Rejection{RejectionCode::schema_violation,
                       "check '" + check.check_id + "' reported twice"};
    }
  }
  if (seen.size() != expected.size()) {
    return Rejection{RejectionCode::schema_violation,
                     "incomplete check coverage: domain '" + *task.domain_id +
                         "' expects " + std::to_string(expected.size()) +
                         " results, got " + std::to_string(seen.size())};
  }

  // Findings must mirror the fail-status checks: every fail check has at
  // least one finding and no finding cites a non-failing check.
  std::set<std::string> fail_checks;
  for (const auto& check : intention.checks) {
    if (check.status == CheckStatus::fail) fail_checks.insert(check.check_id);
  }
  std::set<std::string> finding_checks;
  for (const auto& finding : intention.findings) {
    if (!fail_checks.count(finding.check_id)) {
      return Rejection{RejectionCode::schema_violation,
                       "finding cites check '" + finding.check_id +
                           "' which did not fail"};
    }
    finding_checks.insert(finding.check_id);
  }
  for (const auto& id : fail_checks) {
    if (!finding_checks.count(id)) {
      return Rejection{RejectionCode::schema_violation,
                       "failed check '" + id + "' has no finding"};
    }
  }

  // Builtin checks are deterministic; the agent must restate the
  // orchestrator's own results bit-for-bit.
  for (const auto& expected_result : builtin_results) {
    const auto it = std::find_if(
        intention.checks.begin(), intention.checks.end(),
        [&](const CheckResult& c) {
          return c.check_id == expected_result.check_id;
        });
    if (it == intention.checks.end()) continue;  // coverage error already caught
    if (it->status != expected_result.status ||
        it->evidence != expected_result.evidence) {
      return Rejection{RejectionCode::schema_violation,
                       "builtin check '" + expected_result.check_id +
                           "' disagrees with the deterministic result"};
    }
  }
  return std::nullopt;
}

}  // namespace intent

// Fail-closed validation: either the full list of event bodies to append, or
// exactly one Rejection with zero state effect. Pure function of its inputs;
// builtin_results are the orchestrator's own executions for the task's
// builtin checks.
inline std::variant<EventDrafts, Rejection> validate(
    const Intention& intention, const AuditState& state,
    const Registry& registry, const Boundary& boundary,
    const std::vector<CheckResult>& builtin_results = {}) {
  const TaskRecord* task = registry.find_task(intention.task_id);
  const TaskView* view = state.find_task(intention.task_id);
  if (!task || !view) {
    return Rejection{RejectionCode::unknown_task,
                     "task '" + intention.task_id + "' is not in the roadmap"};
  }

  // Structural action invariants. parse_intention already enforces these for
  // wire inputs; programmatic intentions get the same fail-closed treatment.
  const bool carries_work = !intention.checks.empty() ||
                            !intention.file_updates.empty() ||
                            !intention.findings.empty();
  if (intention.action != Action::complete && carries_work) {
    return Rejection{RejectionCode::compound_action,
                     "only complete may carry checks, file updates or findings"};
  }
  if (intention.action == Action::complete && intention.checks.empty()) {
    return Rejection{RejectionCode::compound_action,
                     "complete requires at least one check result"};
  }
  if (intention.action == Action::block && intention.reason.empty()) {
    return Rejection{RejectionCode::schema_violation,
                     "block requires a non-empty reason"};
  }

  // Done immutability: terminal tasks are never silently reopened.
  if (view->status == TaskStatus::done) {
    return Rejection{RejectionCode::done_reopen,
                     "task '" + intention.task_id + "' is done and immutable"};
  }

  // Prior-status consistency: the agent restates what it believes; a
  // mismatch means it acted on stale context.
  if (intention.prior_status != view->status) {
    return Rejection{RejectionCode::status_mismatch,
                     "intention restates prior status '" +
                         to_string(intention.prior_status) +
                         "' but the task is '" + to_string(view->status) + "'"};
  }

  const auto next = transition(view->status, intention.action);
  if (!next) {
    return Rejection{RejectionCode::invalid_transition,
                     "action '" + to_string(intention.action) +
                         "' is not permitted while the task is '" +
                         to_string(view->status) + "'"};
  }

  // Lock ownership: complete and block are valid only for the claiming actor.
  if (intention.action != Action::claim) {
    if (!view->owner || *view->owner != intention.actor) {
      return Rejection{RejectionCode::lock_violation,
                       "task '" + intention.task_id + "' is owned by '" +
                           (view->owner ? *view->owner : std::string("nobody")) +
                           "', not by '" + intention.actor + "'"};
    }
  }

  EventDrafts drafts;
  if (intention.action == Action::claim) {
    EventDraft draft;
    draft.kind = EventKind::task_claimed;
    draft.actor = intention.actor;
    draft.payload = {{"task_id", intention.task_id},
                     {"prior_status", to_string(intention.prior_status)}};
    drafts.push_back(std::move(draft));
    return drafts;
  }

  if (intention.action == Action::block) {
    EventDraft draft;
    draft.kind = EventKind::task_blocked;
    draft.actor = intention.actor;
    draft.payload = {{"task_id", intention.task_id},
                     {"reason", intention.reason}};
    drafts.push_back(std::move(draft));
    return drafts;
  }

  // complete: boundary discipline first — artifact writes are permitted only
  // here and only inside the task's admissible prefixes.
  std::vector<FileUpdate> normalized_updates;
  for (const auto& update : intention.file_updates) {
    const auto normalized = normalize_artifact_path(update.path);
    if (!normalized) {
      return Rejection{RejectionCode::boundary_violation,
                       "artifact path '" + update.path +
                           "' is not a clean relative path"};
    }
    const bool allowed = std::any_of(
        boundary.allowed_path_prefixes.begin(),
        boundary.allowed_path_prefixes.end(), [&](const std::string& prefix) {
          return normalized->rfind(prefix, 0) == 0;
        });
    if (!allowed) {
      return Rejection{RejectionCode::boundary_violation,
                       "artifact path '" + *normalized +
                           "' is outside the boundary of task " +
                           intention.task_id};
    }
    normalized_updates.push_back(FileUpdate{*normalized, update.content});
  }

  if (auto rejection = intent::check_complete_content(intention, *task,
                                                      registry, builtin_results)) {
    return *rejection;
  }

  // Event bodies, committed in registry declaration order for checks so the
  // admitted log is deterministic.
  if (task->domain_id) {
    for (const auto& record : registry.checks_for_domain(*task->domain_id)) {
      const auto it =
          std::find_if(intention.checks.begin(), intention.checks.end(),
                       [&](const CheckResult& c) {
                         return c.check_id == record.check_id;
                       });
      const CheckResult& result = *it;
      if (result.status != CheckStatus::fail) {
        EventDraft draft;
        draft.kind = EventKind::finding_recorded;
        draft.actor = intention.actor;
        draft.payload = {{"task_id", intention.task_id},
                         {"check_id", result.check_id},
                         {"status", to_string(result.status)},
                         {"explanation", result.explanation}};
        drafts.push_back(std::move(draft));
        continue;
      }
      for (const auto& finding : intention.findings) {
        if (finding.check_id != record.check_id) continue;
        EventDraft draft;
        draft.kind = EventKind::finding_recorded;
        draft.actor = intention.actor;
        json evidence = json::array();
        for (const auto& e : finding.evidence) evidence.push_back(e.to_json());
        draft.payload = {{"task_id", intention.task_id},
                         {"check_id", finding.check_id},
                         {"status", "fail"},
                         {"severity", finding.severity->to_json()},
                         {"evidence", evidence},
                         {"explanation", finding.explanation},
                         {"remediation", finding.remediation}};
        drafts.push_back(std::move(draft));
      }
    }
  }

  for (const auto& update : normalized_updates) {
    EventDraft draft;
    draft.kind = EventKind::artifact_written;
    draft.actor = intention.actor;
    draft.payload = {{"task_id", intention.task_id},
                     {"path", update.path},
                     {"content_sha256", sha256_hex(update.content)},
                     {"bytes", update.content.size()}};
    drafts.push_back(std::move(draft));
  }

  EventDraft completed;
  completed.kind = EventKind::task_completed;
  completed.actor = intention.actor;
  completed.payload = {{"task_id", intention.task_id},
                       {"checks_recorded", intention.checks.size()}};
  if (!task->domain_id) {
    json verification = json::array();
    for (const auto& check : intention.checks) {
      verification.push_back(check.to_json());
    }
    completed.payload["verification_checks"] = verification;
  }
  drafts.push_back(std::move(completed));
  return drafts;
}

}  // namespace auditline
