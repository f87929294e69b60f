#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "auditline/errors.hpp"
#include "auditline/finding.hpp"
#include "auditline/registry.hpp"
#include "auditline/sha256.hpp"

namespace auditline {

// System-level security state consolidated from check-level findings.
struct VulnerabilityRecord {
  std::string vuln_id;  // deterministic function of (check_id, primary path)
  std::vector<std::string> check_ids;
  std::string domain_id;
  Severity severity;
  std::vector<Evidence> locations;  // deduplicated, first-seen order
  std::uint64_t first_event_sequence = 0;
  std::string explanation;
  std::string remediation;

  json to_json() const {
    json j;
    j["vuln_id"] = vuln_id;
    j["check_ids"] = check_ids;
    j["domain_id"] = domain_id;
    j["severity"] = severity.to_json();
    json locs = json::array();
    for (const auto& l : locations) locs.push_back(l.to_json());
    j["locations"] = locs;
    j["first_event_sequence"] = first_event_sequence;
    j["explanation"] = explanation;
    j["remediation"] = remediation;
    return j;
  }
};

struct RiskRow {
  std::string vuln_id;
  SeverityLevel severity = SeverityLevel::INFO;
  int impact_rank = 0;       // count of non-none CIA dimensions
  int remediation_rank = 0;  // 1 when the fix is concrete and small
  int composite_rank = 0;

  json to_json() const {
    return json{{"vuln_id", vuln_id},
                {"severity", to_string(severity)},
                {"impact_rank", impact_rank},
                {"remediation_rank", remediation_rank},
                {"composite_rank", composite_rank}};
  }
};

// Total ordering of the inventory: rows sorted by composite rank descending,
// ties broken by vuln_id ascending.
struct RiskMatrix {
  std::vector<RiskRow> rows;

  json to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) rows_json.push_back(row.to_json());
    return json{{"rows", rows_json}};
  }
};

struct ScoreDeduction {
  int count = 0;
  int weight = 0;
  int subtotal = 0;
};

struct SecurityScore {
  int value = 100;  // clamp(100 - total_deduction, 0, 100)
  std::map<SeverityLevel, ScoreDeduction> deductions;
  int total_deduction = 0;

  json to_json() const {
    json ded = json::object();
    for (const auto& [level, d] : deductions) {
      ded[to_string(level)] = json{
          {"count", d.count}, {"weight", d.weight}, {"subtotal", d.subtotal}};
    }
    return json{{"value", value},
                {"deductions", ded},
                {"total_deduction", total_deduction}};
  }
};

namespace risk_detail {

inline std::string normalize_location_path(const std::string& path) {
  return std::filesystem::path(path).lexically_normal().generic_string();
}

inline std::string make_vuln_id(const std::string& check_id,
                                const std::string& primary_path) {
  return "V-" + sha256_hex(check_id + "\n" + primary_path).substr(0, 12);
}

}  // namespace risk_detail

// Groups fail-status findings by (check_id, normalized primary path), merges
// evidence, and takes the maximum severity among merged findings. Pass and
// not_applicable findings carry no locations and are not vulnerabilities.
// Output order follows the first event of each record.
inline std::vector<VulnerabilityRecord> consolidate(
    const std::vector<Finding>& findings, const Registry& registry) {
  std::vector<VulnerabilityRecord> records;
  std::map<std::pair<std::string, std::string>, std::size_t> index;

  for (const auto& finding : findings) {
    const CheckRecord* check = registry.find_check(finding.check_id);
    if (!check) {
      throw ConsolidationError("finding references unknown check '" +
                               finding.check_id + "'");
    }
    if (finding.status != CheckStatus::fail) continue;
    if (finding.evidence.empty() || !finding.severity) {
      throw ConsolidationError("fail finding for '" + finding.check_id +
                               "' lacks evidence or severity");
    }
    const std::string primary =
        risk_detail::normalize_location_path(finding.evidence.front().path);
    const std::pair<std::string, std::string> key{finding.check_id, primary};

    const auto it = index.find(key);
    if (it == index.end()) {
      VulnerabilityRecord record;
      record.vuln_id = risk_detail::make_vuln_id(finding.check_id, primary);
      record.check_ids = {finding.check_id};
      record.domain_id = check->domain_id;
      record.severity = *finding.severity;
      record.first_event_sequence = finding.event_sequence;
      record.explanation = finding.explanation;
      record.remediation = finding.remediation;
      for (const auto& e : finding.evidence) record.locations.push_back(e);
      index[key] = records.size();
      records.push_back(std::move(record));
      continue;
    }

    VulnerabilityRecord& record = records[it->second];
    record.severity.level = std::max(record.severity.level,
                                     finding.severity->level);
    record.severity.cia_impact =
        merge_cia(record.severity.cia_impact, finding.severity->cia_impact);
    record.first_event_sequence =
        std::min(record.first_event_sequence, finding.event_sequence);
    if (record.remediation.empty()) record.remediation = finding.remediation;
    if (record.explanation.empty()) record.explanation = finding.explanation;
    for (const auto& e : finding.evidence) {
      if (std::find(record.locations.begin(), record.locations.end(), e) ==
          record.locations.end()) {
        record.locations.push_back(e);
      }
    }
  }
  return records;
}

// Severity classification: the registry check's default severity — elevated
// one level when the record's CIA impact reaches full confidentiality or
// integrity — acts as a floor under the consolidated severity. Idempotent,
// and never below any constituent finding's level.
inline Severity classify(const VulnerabilityRecord& record,
                         const Registry& registry) {
  Severity out = record.severity;
  SeverityLevel floor = SeverityLevel::INFO;
  for (const auto& check_id : record.check_ids) {
    if (const CheckRecord* check = registry.find_check(check_id)) {
      floor = std::max(floor, check->default_severity.level);
    }
  }
  const bool full_ci =
      record.severity.cia_impact.confidentiality == CiaLevel::full ||
      record.severity.cia_impact.integrity == CiaLevel::full;
  if (full_ci) floor = elevate(floor);
  out.level = std::max(out.level, floor);
  return out;
}

inline std::vector<VulnerabilityRecord> classify_all(
    std::vector<VulnerabilityRecord> inventory, const Registry& registry) {
  for (auto& record : inventory) record.severity = classify(record, registry);
  return inventory;
}

// Composite rank compares (severity weight, impact rank, remediation
// relevance) lexicographically; encoded as weight*100 + impact*10 + relevance.
inline int composite_rank(int weight, int impact_rank, int remediation_rank) {
  return weight * 100 + impact_rank * 10 + remediation_rank;
}

inline RiskMatrix build_matrix(const std::vector<VulnerabilityRecord>& inventory,
                               const ScoringPolicy& scoring,
                               std::size_t quick_fix_max_locations) {
  RiskMatrix matrix;
  for (const auto& record : inventory) {
    RiskRow row;
    row.vuln_id = record.vuln_id;
    row.severity = record.severity.level;
    row.impact_rank = record.severity.cia_impact.impacted_dimensions();
    row.remediation_rank = (!record.remediation.empty() &&
                            record.locations.size() <= quick_fix_max_locations)
                               ? 1
                               : 0;
    row.composite_rank = composite_rank(scoring.weight(row.severity),
                                        row.impact_rank, row.remediation_rank);
    matrix.rows.push_back(std::move(row));
  }
  std::sort(matrix.rows.begin(), matrix.rows.end(),
            [](const RiskRow& a, const RiskRow& b) {
              if (a.composite_rank != b.composite_rank) {
                return a.composite_rank > b.composite_rank;
              }
              return a.vuln_id < b.vuln_id;
            });
  return matrix;
}

// 0..100 security score by weighted deduction, itemized per severity.
inline SecurityScore compute_score(
    const std::vector<VulnerabilityRecord>& inventory,
    const ScoringPolicy& scoring) {
  SecurityScore score;
  for (const auto& record : inventory) {
    ScoreDeduction& d = score.deductions[record.severity.level];
    d.count += 1;
    d.weight = scoring.weight(record.severity.level);
    d.subtotal = d.count * d.weight;
  }
  for (const auto& [level, d] : score.deductions) {
    score.total_deduction += d.subtotal;
  }
  score.value = std::clamp(100 - score.total_deduction, 0, 100);
  return score;
}

}  // namespace auditline
