#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "auditline/clock.hpp"
#include "auditline/projection.hpp"
#include "auditline/risk.hpp"

namespace auditline {

inline constexpr const char* kReportSchemaVersion = "1";

// Terminal products of a run: both documents are projections of the same
// admitted state.
struct ReportBundle {
  std::string markdown;
  json json_doc;
  std::string generated_from_state_hash;
  std::string generated_at;
};

namespace report_detail {

struct CheckRow {
  const CheckRecord* check = nullptr;
  std::string status;  // pass | fail | not_applicable
  std::vector<std::uint64_t> event_sequences;
  bool blocked = false;
  std::string note;
};

// Task auditing each domain (phase 2 holds exactly one per domain).
inline const TaskRecord* domain_task(const Registry& registry,
                                     const std::string& domain_id) {
  for (const auto& task : registry.tasks) {
    if (task.phase == 2 && task.domain_id && *task.domain_id == domain_id) {
      return &task;
    }
  }
  return nullptr;
}

// One row per registry check, aggregated over the projected findings.
// Blocked domains surface as explicit coverage gaps, never silently.
inline std::vector<CheckRow> check_rows(const AuditState& state,
                                        const Registry& registry) {
  std::vector<CheckRow> rows;
  for (const auto& check : registry.checks) {
    CheckRow row;
    row.check = &check;

    bool any_fail = false;
    bool any_pass = false;
    bool any_na = false;
    for (const auto& finding : state.findings) {
      if (finding.check_id != check.check_id) continue;
      row.event_sequences.push_back(finding.event_sequence);
      if (finding.status == CheckStatus::fail) any_fail = true;
      if (finding.status == CheckStatus::pass) any_pass = true;
      if (finding.status == CheckStatus::not_applicable) any_na = true;
    }

    if (!row.event_sequences.empty()) {
      row.status = any_fail ? "fail" : (any_pass ? "pass" : "not_applicable");
      (void)any_na;
    } else {
      row.status = "not_applicable";
      const TaskRecord* task = domain_task(registry, check.domain_id);
      const TaskView* view = task ? state.find_task(task->task_id) : nullptr;
      if (view && view->status == TaskStatus::blocked) {
        row.blocked = true;
        row.note = "domain audit blocked: " +
                   view->block_reason.value_or("no reason recorded");
      } else {
        row.note = "not audited";
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::map<SeverityLevel, int> severity_counts(const RiskMatrix& matrix) {
  std::map<SeverityLevel, int> counts;
  for (const auto& row : matrix.rows) counts[row.severity]++;
  return counts;
}

inline std::vector<std::pair<std::string, std::string>> blocked_tasks(
    const AuditState& state) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [id, view] : state.tasks) {
    if (view.status == TaskStatus::blocked) {
      out.emplace_back(id, view.block_reason.value_or(""));
    }
  }
  return out;
}

inline std::vector<std::string> blocked_domains(const AuditState& state,
                                                const Registry& registry) {
  std::vector<std::string> out;
  for (const auto& domain : registry.domains) {
    const TaskRecord* task = domain_task(registry, domain.id);
    const TaskView* view = task ? state.find_task(task->task_id) : nullptr;
    if (view && view->status == TaskStatus::blocked) out.push_back(domain.id);
  }
  return out;
}

inline std::string trimmed_lower(const std::string& s) {
  std::string out;
  for (const char c : s) {
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  const auto begin = out.find_first_not_of(" \t\n");
  const auto end = out.find_last_not_of(" \t\n ");
  if (begin == std::string::npos) return "";
  return out.substr(begin, end - begin + 1);
}

}  // namespace report_detail

// The report must be a projection of exactly the given state; any drift
// between state, inventory, matrix and score means a stale input.
inline void validate_report_inputs(const AuditState& state,
                                   const Registry& registry,
                                   const std::vector<VulnerabilityRecord>& inventory,
                                   const RiskMatrix& matrix,
                                   const SecurityScore& score) {
  const auto recomputed =
      classify_all(consolidate(state.findings, registry), registry);
  if (recomputed.size() != inventory.size()) {
    throw ConsistencyError("inventory does not match the projected state");
  }
  for (std::size_t i = 0; i < inventory.size(); ++i) {
    if (inventory[i].vuln_id != recomputed[i].vuln_id ||
        inventory[i].severity.level != recomputed[i].severity.level) {
      throw ConsistencyError("inventory record " + inventory[i].vuln_id +
                             " does not match the projected state");
    }
  }
  std::set<std::string> matrix_ids;
  for (const auto& row : matrix.rows) matrix_ids.insert(row.vuln_id);
  if (matrix_ids.size() != matrix.rows.size() ||
      matrix.rows.size() != inventory.size()) {
    throw ConsistencyError("risk matrix does not cover the inventory exactly");
  }
  for (const auto& record : inventory) {
    if (!matrix_ids.count(record.vuln_id)) {
      throw ConsistencyError("risk matrix is missing " + record.vuln_id);
    }
  }
  const SecurityScore recomputed_score = compute_score(inventory, registry.scoring);
  if (recomputed_score.value != score.value) {
    throw ConsistencyError("score does not match the inventory");
  }
}

// Decision-oriented one-pager: score, severity counts, top risks by matrix
// rank, and blocked-coverage caveats. States audited-scope results only.
inline std::string executive_summary(const AuditState& state,
                                     const RiskMatrix& matrix,
                                     const SecurityScore& score) {
  std::string out;
  out += "Security score: " + std::to_string(score.value) + "/100.\n";

  const auto counts = report_detail::severity_counts(matrix);
  out += "Vulnerabilities by severity:";
  const SeverityLevel order[] = {SeverityLevel::CRITICAL, SeverityLevel::HIGH,
                                 SeverityLevel::MEDIUM, SeverityLevel::LOW,
                                 SeverityLevel::INFO};
  for (const auto level : order) {
    const auto it = counts.find(level);
    out += " " + to_string(level) + " " +
           std::to_string(it == counts.end() ? 0 : it->second) + ",";
  }
  out.back() = '.';
  out += "\n";

  if (matrix.rows.empty()) {
    out += "No findings were recorded in the audited scope.\n";
  } else {
    out += "Top risks:\n";
    const std::size_t top = std::min<std::size_t>(5, matrix.rows.size());
    for (std::size_t i = 0; i < top; ++i) {
      const RiskRow& row = matrix.rows[i];
      out += std::to_string(i + 1) + ". " + row.vuln_id + " (" +
             to_string(row.severity) + ", impact rank " +
             std::to_string(row.impact_rank) + ")\n";
    }
  }

  const auto blocked = report_detail::blocked_tasks(state);
  if (blocked.empty()) {
    out += "Coverage caveats: none; every roadmap task reached a terminal "
           "state by completion.\n";
  } else {
    out += "Coverage caveats: " + std::to_string(blocked.size()) +
           " task(s) blocked; their scope was not audited.\n";
  }
  out += "These results describe the audited scope only; they do not "
         "establish the absence of vulnerabilities elsewhere.\n";
  return out;
}

// The structured JSON report: run metadata, state hash, artifact index, the
// full check-result table, inventory, matrix, score breakdown and blocked
// tasks. Canonical serialization; every finding carries its event sequences.
inline json render_json(const AuditState& state, const Registry& registry,
                        const std::vector<VulnerabilityRecord>& inventory,
                        const RiskMatrix& matrix, const SecurityScore& score,
                        const std::string& generated_at, bool partial) {
  validate_report_inputs(state, registry, inventory, matrix, score);

  json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["generated_at"] = generated_at;
  doc["partial"] = partial;
  doc["state_hash"] = state.state_hash;

  const auto status_counts = state.status_counts();
  json run;
  run["phase"] = state.current_phase;
  if (state.last_sequence) run["last_sequence"] = *state.last_sequence;
  run["task_counts"] = json{
      {"todo", status_counts.at(TaskStatus::todo)},
      {"in_progress", status_counts.at(TaskStatus::in_progress)},
      {"done", status_counts.at(TaskStatus::done)},
      {"blocked", status_counts.at(TaskStatus::blocked)}};
  doc["run"] = run;

  json coverage;
  coverage["phases"] = registry.phases.size();
  coverage["tasks"] = registry.tasks.size();
  coverage["domains"] = registry.domains.size();
  coverage["checks"] = registry.checks.size();
  coverage["blocked_domains"] = report_detail::blocked_domains(state, registry);
  doc["coverage"] = coverage;

  json artifact_index = json::object();
  for (const auto& [path, ref] : state.artifacts) {
    artifact_index[path] = ref.to_json();
  }
  doc["artifact_index"] = artifact_index;

  json check_results = json::array();
  for (const auto& row : report_detail::check_rows(state, registry)) {
    json r;
    r["check_id"] = row.check->check_id;
    r["domain_id"] = row.check->domain_id;
    r["title"] = row.check->title;
    r["status"] = row.status;
    r["event_sequences"] = row.event_sequences;
    r["blocked"] = row.blocked;
    if (!row.note.empty()) r["note"] = row.note;
    check_results.push_back(std::move(r));
  }
  doc["check_results"] = check_results;

  json findings = json::array();
  for (const auto& finding : state.findings) {
    findings.push_back(finding.to_json());
  }
  doc["findings"] = findings;

  json inventory_json = json::array();
  for (const auto& record : inventory) inventory_json.push_back(record.to_json());
  doc["inventory"] = inventory_json;
  doc["matrix"] = matrix.to_json();
  doc["score"] = score.to_json();

  json blocked = json::array();
  for (const auto& [task_id, reason] : report_detail::blocked_tasks(state)) {
    blocked.push_back(json{{"task_id", task_id}, {"reason", reason}});
  }
  doc["blocked_tasks"] = blocked;
  return doc;
}

// Human-readable final report with a fixed section order; every claim cites
// the finding_recorded event it projects ([E:n]).
inline std::string render_markdown(const AuditState& state,
                                   const Registry& registry,
                                   const std::vector<VulnerabilityRecord>& inventory,
                                   const RiskMatrix& matrix,
                                   const SecurityScore& score,
                                   const std::string& generated_at,
                                   bool partial) {
  validate_report_inputs(state, registry, inventory, matrix, score);

  auto find_record = [&](const std::string& vuln_id) -> const VulnerabilityRecord* {
    for (const auto& record : inventory) {
      if (record.vuln_id == vuln_id) return &record;
    }
    return nullptr;
  };

  std::string md;
  md += "# Security Audit Report\n\n";
  md += "- generated_at: " + generated_at + "\n";
  md += "- state_hash: `" + state.state_hash + "`\n";
  md += std::string("- completeness: ") +
        (partial ? "partial (blocked coverage declared below)" : "complete") +
        "\n\n";

  md += "## 1. Executive Summary\n\n";
  md += executive_summary(state, matrix, score);
  md += "\n";

  const auto status_counts = state.status_counts();
  md += "## 2. Scope and Coverage\n\n";
  md += "- phases: " + std::to_string(registry.phases.size()) + "\n";
  md += "- tasks: " + std::to_string(registry.tasks.size()) + " (done " +
        std::to_string(status_counts.at(TaskStatus::done)) + ", blocked " +
        std::to_string(status_counts.at(TaskStatus::blocked)) + ", open " +
        std::to_string(status_counts.at(TaskStatus::todo) +
                       status_counts.at(TaskStatus::in_progress)) +
        ")\n";
  const auto blocked_domains = report_detail::blocked_domains(state, registry);
  md += "- domains: " + std::to_string(registry.domains.size()) +
        " (audited " +
        std::to_string(registry.domains.size() - blocked_domains.size()) +
        ", blocked " + std::to_string(blocked_domains.size()) + ")\n";
  md += "- checks: " + std::to_string(registry.checks.size()) + "\n";
  if (!blocked_domains.empty()) {
    md += "\nExplicit coverage gaps (domains not audited):\n";
    for (const auto& domain_id : blocked_domains) {
      const DomainRecord* domain = registry.find_domain(domain_id);
      const TaskRecord* task = report_detail::domain_task(registry, domain_id);
      const TaskView* view = task ? state.find_task(task->task_id) : nullptr;
      md += "- " + (domain ? domain->name : domain_id) + " (" + domain_id +
            "): " +
            (view && view->block_reason ? *view->block_reason
                                        : std::string("blocked")) +
            "\n";
    }
  }
  md += "\n";

  md += "## 3. Findings by Domain\n\n";
  for (const auto& domain : registry.domains) {
    md += "### " + domain.name + " (" + domain.id + ")\n\n";
    const bool blocked =
        std::find(blocked_domains.begin(), blocked_domains.end(), domain.id) !=
        blocked_domains.end();
    if (blocked) {
      md += "Not audited: the domain task was blocked. This is a declared "
            "coverage gap, not a clean result.\n\n";
      continue;
    }
    std::vector<const VulnerabilityRecord*> domain_records;
    for (const auto& record : inventory) {
      if (record.domain_id == domain.id) domain_records.push_back(&record);
    }
    if (domain_records.empty()) {
      md += "No findings. All executed checks in this domain passed or were "
            "not applicable.\n\n";
      continue;
    }
    for (const VulnerabilityRecord* record : domain_records) {
      md += "- **" + record->vuln_id + "** (" +
            to_string(record->severity.level) + ") — checks:";
      for (const auto& id : record->check_ids) md += " " + id;
      md += " — evidence:";
      for (const auto& location : record->locations) {
        md += " `" + location.path +
              (location.line ? ":" + std::to_string(*location.line) : "") + "`";
      }
      md += " [E:" + std::to_string(record->first_event_sequence) + "]\n";
      if (!record->explanation.empty()) {
        md += "  - " + record->explanation + "\n";
      }
    }
    md += "\n";
  }

  md += "## 4. Risk Matrix\n\n";
  md += "| rank | vuln_id | severity | impact | quick fix | composite |\n";
  md += "|------|---------|----------|--------|-----------|-----------|\n";
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const RiskRow& row = matrix.rows[i];
    md += "| " + std::to_string(i + 1) + " | " + row.vuln_id + " | " +
          to_string(row.severity) + " | " + std::to_string(row.impact_rank) +
          " | " + std::to_string(row.remediation_rank) + " | " +
          std::to_string(row.composite_rank) + " |\n";
  }
  if (matrix.rows.empty()) md += "| - | (empty) | - | - | - | - |\n";
  md += "\n";

  md += "## 5. Technical Remediations\n\n";
  if (matrix.rows.empty()) {
    md += "No remediations required within the audited scope.\n";
  }
  for (const auto& row : matrix.rows) {
    const VulnerabilityRecord* record = find_record(row.vuln_id);
    if (!record) continue;
    md += "- " + record->vuln_id + " (" + to_string(record->severity.level) +
          ", " + record->domain_id + "): " +
          (record->remediation.empty() ? "remediation pending analysis"
                                       : record->remediation) +
          " [E:" + std::to_string(record->first_event_sequence) + "]\n";
  }
  md += "\n";

  // Recurring remediation patterns: anything surfacing in two or more
  // domains is promoted to a practice.
  md += "## 6. Best Practices\n\n";
  std::map<std::string, std::set<std::string>> pattern_domains;
  std::map<std::string, std::string> pattern_text;
  for (const auto& record : inventory) {
    const std::string key = report_detail::trimmed_lower(record.remediation);
    if (key.empty()) continue;
    pattern_domains[key].insert(record.domain_id);
    pattern_text.emplace(key, record.remediation);
  }
  bool any_practice = false;
  for (const auto& [key, domains] : pattern_domains) {
    if (domains.size() < 2) continue;
    any_practice = true;
    md += "- " + pattern_text.at(key) + " (recurs across:";
    for (const auto& d : domains) md += " " + d;
    md += ")\n";
  }
  if (!any_practice) {
    md += "No remediation pattern recurred across domains in this run.\n";
  }
  md += "\n";

  md += "## 7. Appendix: Event Citations\n\n";
  if (state.findings.empty()) {
    md += "No finding events were recorded.\n";
  }
  for (const auto& finding : state.findings) {
    md += "- [E:" + std::to_string(finding.event_sequence) + "] " +
          finding.check_id + " " + to_string(finding.status) + " (task " +
          finding.task_id + ")\n";
  }
  return md;
}

// Computes the risk cascade from the state and renders both documents.
inline ReportBundle compile_reports(const AuditState& state,
                                    const Registry& registry,
                                    std::size_t quick_fix_max_locations,
                                    const Clock& clock, bool partial) {
  const auto inventory =
      classify_all(consolidate(state.findings, registry), registry);
  const RiskMatrix matrix =
      build_matrix(inventory, registry.scoring, quick_fix_max_locations);
  const SecurityScore score = compute_score(inventory, registry.scoring);

  ReportBundle bundle;
  bundle.generated_at = clock.now_iso8601();
  bundle.generated_from_state_hash = state.state_hash;
  bundle.json_doc = render_json(state, registry, inventory, matrix, score,
                                bundle.generated_at, partial);
  bundle.markdown = render_markdown(state, registry, inventory, matrix, score,
                                    bundle.generated_at, partial);
  return bundle;
}

}  // namespace auditline
