#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "auditline/severity.hpp"

namespace auditline {

enum class CheckStatus { pass, fail, not_applicable };

inline std::string to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::not_applicable: return "not_applicable";
  }
  return "not_applicable";
}

inline std::optional<CheckStatus> check_status_from_string(std::string_view s) {
  if (s == "pass") return CheckStatus::pass;
  if (s == "fail") return CheckStatus::fail;
  if (s == "not_applicable") return CheckStatus::not_applicable;
  return std::nullopt;
}

// A code or configuration location backing a finding.
struct Evidence {
  std::string path;
  std::optional<std::uint64_t> line;  // 1-based
  std::string excerpt;

  bool operator==(const Evidence&) const = default;

  json to_json() const {
    json j;
    j["path"] = path;
    if (line) j["line"] = *line;
    j["excerpt"] = excerpt;
    return j;
  }
};

// The structured evidence object of one check execution. status=fail binds
// severity, non-empty evidence and non-empty remediation; pass and
// not_applicable carry neither severity nor evidence.
struct CheckResult {
  std::string check_id;
  CheckStatus status = CheckStatus::not_applicable;
  std::optional<Severity> severity;
  std::vector<Evidence> evidence;
  std::string explanation;
  std::string remediation;

  bool operator==(const CheckResult&) const = default;

  json to_json() const {
    json j;
    j["check_id"] = check_id;
    j["status"] = to_string(status);
    if (severity) j["severity"] = severity->to_json();
    json ev = json::array();
    for (const auto& e : evidence) ev.push_back(e.to_json());
    j["evidence"] = ev;
    j["explanation"] = explanation;
    j["remediation"] = remediation;
    return j;
  }
};

// One projected check outcome, pinned to the event that admitted it.
struct Finding {
  std::string task_id;
  std::string check_id;
  CheckStatus status = CheckStatus::not_applicable;
  std::optional<Severity> severity;
  std::vector<Evidence> evidence;
  std::string explanation;
  std::string remediation;
  std::uint64_t event_sequence = 0;

  json to_json() const {
    json j;
    j["task_id"] = task_id;
    j["check_id"] = check_id;
    j["status"] = to_string(status);
    if (severity) j["severity"] = severity->to_json();
    json ev = json::array();
    for (const auto& e : evidence) ev.push_back(e.to_json());
    j["evidence"] = ev;
    j["explanation"] = explanation;
    j["remediation"] = remediation;
    j["event_sequence"] = event_sequence;
    return j;
  }
};

}  // namespace auditline
